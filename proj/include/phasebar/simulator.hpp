#pragma once

#include "phasebar/error.hpp"
#include "phasebar/phase_type.hpp"
#include "phasebar/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <thread>
#include <vector>

namespace phasebar {

struct SimConfig {
    std::uint64_t paths = 100'000;
    /// Simulation stops at this time. Unset: chosen so the truncation bound is below 1e-5.
    std::optional<double> horizon;
    std::uint64_t seed = 20240601;
    /// Pairs paths 2k, 2k + 1 on mirrored claim-size draws.
    bool antithetic = false;
    unsigned threads = 1;
};

struct SimEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::uint64_t paths = 0;
    double truncation_bound = 0.0;
    std::uint64_t seed = 0;
    double horizon = 0.0;
};

/// e^{-delta T} (x0 + c / delta): dividends paid after T cannot exceed this.
inline double truncation_bound(const RiskModel& model, double x0, double horizon) {
    return std::exp(-model.discount_rate * horizon) * (x0 + model.premium_rate / model.discount_rate);
}

/// Shortest horizon whose truncation bound is at most `bound`.
inline double horizon_for_bound(const RiskModel& model, double x0, double bound) {
    const double scale = x0 + model.premium_rate / model.discount_rate;
    return std::max(1.0, std::log(scale / bound) / model.discount_rate);
}

/// 64-bit engine whose output is the bitwise complement of the wrapped one,
/// so uniform draws u become 1 + 2^-53 - u.
template <class Engine>
class Mirrored {
public:
    using result_type = typename Engine::result_type;
    explicit Mirrored(Engine& inner) : inner_(&inner) {}
    static constexpr result_type min() { return Engine::min(); }
    static constexpr result_type max() { return Engine::max(); }
    result_type operator()() { return ~(*inner_)(); }

private:
    Engine* inner_;
};

/// Independent environment and claim-size streams for one path.
struct PathStreams {
    std::mt19937_64 environment;
    std::mt19937_64 claims;

    static PathStreams for_path(std::uint64_t seed, std::uint64_t index) {
        const auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v); };
        const auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
        std::seed_seq env{lo(seed), hi(seed), lo(index), hi(index), 0u};
        std::seed_seq clm{lo(seed), hi(seed), lo(index), hi(index), 1u};
        return PathStreams{std::mt19937_64(env), std::mt19937_64(clm)};
    }
};

namespace detail {

/// c * int_a^b e^{-delta s} ds
inline double discounted_flow(double c, double delta, double a, double b) {
    if (!(b > a)) return 0.0;
    return c * std::exp(-delta * a) * -std::expm1(-delta * (b - a)) / delta;
}

template <class ClaimRng>
double run_path(const RiskModel& model, std::span<const double> barriers, double x0, std::size_t phase0,
                double horizon, std::mt19937_64& env_rng, ClaimRng& claim_rng) {
    const double c = model.premium_rate;
    const double delta = model.discount_rate;
    const PhaseTypeModel& env = model.environment;

    double s = 0.0;
    double x = x0;
    std::size_t phase = phase0;
    double total = 0.0;

    auto pay_excess = [&] {
        const double b = barriers[phase];
        if (x > b) {
            total += std::exp(-delta * s) * (x - b);
            x = b;
        }
    };

    pay_excess();
    while (true) {
        const Transition tr = sample_transition(env, phase, env_rng);
        const double end = s + tr.holding_time;
        const double stop = std::min(end, horizon);
        const double b = barriers[phase];
        if (x < b) {
            const double hit = s + (b - x) / c;
            if (hit < stop) {
                total += discounted_flow(c, delta, hit, stop);
                x = b;
            } else {
                x += c * (stop - s);
            }
        } else {
            total += discounted_flow(c, delta, s, stop);
        }
        if (end >= horizon) break;
        s = end;

        if (tr.is_claim()) {
            x -= detail::exponential(claim_rng, model.claim_size_rate);
            if (x < 0.0) break;
            phase = sample_restart(env, env_rng);
        } else {
            phase = tr.next;
        }
        // Environment event first, then the new phase's lump rule.
        pay_excess();
    }
    return total;
}

inline void check_sim_inputs(const RiskModel& model, std::span<const double> barriers, double x0,
                             std::size_t phase0, double horizon) {
    if (barriers.size() != model.phases()) {
        throw Error(ErrorCode::InvalidArgument, "need one barrier per phase");
    }
    for (double b : barriers) {
        if (!(b >= 0.0) || !std::isfinite(b)) throw Error(ErrorCode::InvalidArgument, "barriers must be >= 0");
    }
    if (!(x0 >= 0.0)) throw Error(ErrorCode::InvalidArgument, "x0 must be >= 0");
    model.environment.check_phase(phase0);
    if (!(horizon > 0.0)) throw Error(ErrorCode::InvalidArgument, "horizon must be positive");
}

}  // namespace detail

/// Discounted dividends of one path of the phase-wise barrier strategy, stopped
/// at ruin or at `horizon`. With `mirror_claims` the claim-size stream is read
/// through Mirrored, giving the antithetic partner of the same streams.
inline double simulate_path(const RiskModel& model, std::span<const double> barriers, double x0, std::size_t phase0,
                            double horizon, PathStreams& streams, bool mirror_claims = false) {
    detail::check_sim_inputs(model, barriers, x0, phase0, horizon);
    if (mirror_claims) {
        Mirrored<std::mt19937_64> claims(streams.claims);
        return detail::run_path(model, barriers, x0, phase0, horizon, streams.environment, claims);
    }
    return detail::run_path(model, barriers, x0, phase0, horizon, streams.environment, streams.claims);
}

/// Sample mean over cfg.paths paths. Path k is seeded from (cfg.seed, k) alone
/// (from (cfg.seed, k / 2) with antithetics), so the estimate does not depend
/// on cfg.threads.
inline SimEstimate estimate_value(const RiskModel& model, std::span<const double> barriers, double x0,
                                  std::size_t phase0, const SimConfig& cfg) {
    if (cfg.paths < 1) throw Error(ErrorCode::InvalidArgument, "paths must be >= 1");
    if (cfg.antithetic && cfg.paths % 2 != 0) {
        throw Error(ErrorCode::InvalidArgument, "antithetic sampling needs an even path count");
    }
    const double horizon = cfg.horizon.value_or(horizon_for_bound(model, x0, 1e-5));
    detail::check_sim_inputs(model, barriers, x0, phase0, horizon);

    std::vector<double> totals(cfg.paths);
    auto work = [&](std::uint64_t begin, std::uint64_t end) {
        for (std::uint64_t k = begin; k < end; ++k) {
            const bool mirror = cfg.antithetic && (k % 2 == 1);
            PathStreams streams = PathStreams::for_path(cfg.seed, cfg.antithetic ? k / 2 : k);
            totals[k] = simulate_path(model, barriers, x0, phase0, horizon, streams, mirror);
        }
    };

    const unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(cfg.paths)));
    if (threads == 1) {
        work(0, cfg.paths);
    } else {
        std::vector<std::jthread> pool;
        const std::uint64_t chunk = (cfg.paths + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const std::uint64_t begin = t * chunk;
            const std::uint64_t end = std::min<std::uint64_t>(cfg.paths, begin + chunk);
            if (begin < end) pool.emplace_back(work, begin, end);
        }
    }

    // Antithetic pairs are averaged first; the standard error is over pairs.
    std::vector<double> samples;
    if (cfg.antithetic) {
        samples.reserve(cfg.paths / 2);
        for (std::uint64_t k = 0; k < cfg.paths; k += 2) samples.push_back(0.5 * (totals[k] + totals[k + 1]));
    } else {
        samples = std::move(totals);
    }

    long double sum = 0.0L;
    for (double v : samples) sum += v;
    const long double mean = sum / static_cast<long double>(samples.size());
    long double ss = 0.0L;
    for (double v : samples) ss += (v - mean) * (v - mean);

    SimEstimate est;
    est.mean = static_cast<double>(mean);
    est.paths = cfg.paths;
    if (samples.size() > 1) {
        const long double var = ss / static_cast<long double>(samples.size() - 1);
        est.std_error = static_cast<double>(std::sqrt(var / static_cast<long double>(samples.size())));
    }
    est.truncation_bound = truncation_bound(model, x0, horizon);
    est.seed = cfg.seed;
    est.horizon = horizon;
    return est;
}

}  // namespace phasebar
