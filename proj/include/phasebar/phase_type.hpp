#pragma once

#include "phasebar/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <type_traits>
#include <vector>

namespace phasebar {

namespace detail {

/// Uniform draw on (0, 1] from the top 53 bits of a 64-bit engine.
/// Written out instead of std::uniform_real_distribution so that streams are
/// identical across standard library implementations.
template <class Rng>
double uniform_open_closed(Rng& rng) {
    static_assert(std::is_same_v<typename Rng::result_type, std::uint64_t>,
                  "phasebar sampling expects a 64-bit engine such as std::mt19937_64");
    constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
    return (static_cast<double>(rng() >> 11) + 1.0) * scale;
}

template <class Rng>
double exponential(Rng& rng, double rate) {
    return -std::log(uniform_open_closed(rng)) / rate;
}

}  // namespace detail

/// Outcome of one holding period of the environment chain.
struct Transition {
    static constexpr std::size_t claim = std::numeric_limits<std::size_t>::max();

    double holding_time = 0.0;
    std::size_t next = claim;  ///< 0-based phase, or `claim` on absorption

    [[nodiscard]] bool is_claim() const noexcept { return next == claim; }
};

/// Terminating Markov environment whose absorption time is the interclaim time.
///
/// Phases are 0-based here. The exit vector is stored next to the subintensity
/// matrix because the solver reads it in its inner loop.
class PhaseTypeModel {
public:
    static constexpr double probability_tolerance = 1e-12;

    /// Checks the generator structure and builds the exit vector t = -T e.
    /// A restart vector whose sum is within `probability_tolerance` of one is
    /// renormalised; anything further off is rejected.
    static PhaseTypeModel validate(const Eigen::MatrixXd& subintensity, const Eigen::VectorXd& restart) {
        const auto n = subintensity.rows();
        if (n < 1 || subintensity.cols() != n) {
            throw Error(ErrorCode::InvalidArgument, "subintensity matrix must be square with n >= 1");
        }
        if (restart.size() != n) {
            throw Error(ErrorCode::RestartNotProbability,
                        "pi has " + std::to_string(restart.size()) + " entries, expected " + std::to_string(n));
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                const double v = subintensity(i, j);
                if (!std::isfinite(v)) {
                    throw Error(ErrorCode::InvalidArgument, "T contains a non-finite entry");
                }
                if (i != j && v < 0.0) {
                    throw Error(ErrorCode::NegativeOffDiagonal,
                                "T[" + std::to_string(i + 1) + "][" + std::to_string(j + 1) + "] < 0");
                }
            }
            if (subintensity(i, i) >= 0.0) {
                throw Error(ErrorCode::PositiveDiagonal,
                            "T[" + std::to_string(i + 1) + "][" + std::to_string(i + 1) + "] must be < 0");
            }
        }

        Eigen::VectorXd exit = -(subintensity * Eigen::VectorXd::Ones(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            // Diagonal minus off-diagonal sum, exact in the sense that T e + t == 0.
            if (exit(i) < 0.0) {
                throw Error(ErrorCode::NegativeExitRate,
                            "row " + std::to_string(i + 1) + " of T sums to " + std::to_string(-exit(i)));
            }
        }
        if (exit.maxCoeff() <= 0.0) {
            throw Error(ErrorCode::NegativeExitRate, "no phase has a positive claim intensity");
        }

        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!std::isfinite(restart(i)) || restart(i) < 0.0) {
                throw Error(ErrorCode::RestartNotProbability, "pi[" + std::to_string(i + 1) + "] is negative");
            }
            total += restart(i);
        }
        if (std::abs(total - 1.0) > probability_tolerance) {
            throw Error(ErrorCode::RestartNotProbability, "pi sums to " + std::to_string(total));
        }

        Eigen::FullPivLU<Eigen::MatrixXd> lu(subintensity);
        if (!lu.isInvertible()) {
            throw Error(ErrorCode::SingularSubintensity, "T is singular");
        }

        PhaseTypeModel model;
        model.t_ = subintensity;
        model.pi_ = restart / total;
        model.exit_ = exit;
        model.expected_time_ = -lu.solve(Eigen::VectorXd::Ones(n));
        return model;
    }

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(t_.rows()); }
    [[nodiscard]] const Eigen::MatrixXd& subintensity() const noexcept { return t_; }
    [[nodiscard]] const Eigen::VectorXd& restart() const noexcept { return pi_; }
    [[nodiscard]] const Eigen::VectorXd& exit() const noexcept { return exit_; }

    /// lambda_ij for i != j (j < n), or the exit rate for j == n.
    [[nodiscard]] double rate(std::size_t i, std::size_t j) const {
        const auto ii = static_cast<Eigen::Index>(i);
        if (j == size()) return exit_(ii);
        return t_(ii, static_cast<Eigen::Index>(j));
    }
    /// Total leaving intensity lambda_i = -T[i][i].
    [[nodiscard]] double leave_rate(std::size_t i) const { return -t_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)); }

    /// Mean time until the next claim when the chain currently sits in phase i, i.e. -(T^{-1} e)[i].
    [[nodiscard]] double expected_time_to_claim(std::size_t i) const {
        check_phase(i);
        return expected_time_(static_cast<Eigen::Index>(i));
    }

    void check_phase(std::size_t i) const {
        if (i >= size()) {
            throw Error(ErrorCode::InvalidArgument,
                        "phase " + std::to_string(i + 1) + " out of range 1.." + std::to_string(size()));
        }
    }

private:
    PhaseTypeModel() = default;

    Eigen::MatrixXd t_;
    Eigen::VectorXd pi_;
    Eigen::VectorXd exit_;
    Eigen::VectorXd expected_time_;
};

inline double expected_time_to_claim(const PhaseTypeModel& model, std::size_t phase) {
    return model.expected_time_to_claim(phase);
}

/// One sojourn in `phase`: an Exponential(lambda_i) holding time followed by a
/// jump to j with probability lambda_ij / lambda_i, or to the claim state with
/// probability t_i / lambda_i. Consumes exactly two draws from `rng`.
template <class Rng>
Transition sample_transition(const PhaseTypeModel& model, std::size_t phase, Rng& rng) {
    const double leave = model.leave_rate(phase);
    Transition out;
    out.holding_time = detail::exponential(rng, leave);

    double target = (1.0 - detail::uniform_open_closed(rng)) * leave;  // in [0, leave)
    const std::size_t n = model.size();
    for (std::size_t j = 0; j < n; ++j) {
        if (j == phase) continue;
        const double r = model.rate(phase, j);
        if (target < r) {
            out.next = j;
            return out;
        }
        target -= r;
    }
    if (model.rate(phase, n) > 0.0) {
        out.next = Transition::claim;
        return out;
    }
    for (std::size_t j = n; j-- > 0;) {
        if (j != phase && model.rate(phase, j) > 0.0) {
            out.next = j;
            break;
        }
    }
    return out;
}

/// Draws the phase the environment restarts in after a claim. One draw.
template <class Rng>
std::size_t sample_restart(const PhaseTypeModel& model, Rng& rng) {
    double target = 1.0 - detail::uniform_open_closed(rng);
    const std::size_t n = model.size();
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const double p = model.restart()(static_cast<Eigen::Index>(j));
        if (target < p) return j;
        target -= p;
    }
    // Rounding leftovers land on the last phase with positive mass.
    for (std::size_t j = n; j-- > 0;) {
        if (model.restart()(static_cast<Eigen::Index>(j)) > 0.0) return j;
    }
    return n - 1;
}

}  // namespace phasebar
