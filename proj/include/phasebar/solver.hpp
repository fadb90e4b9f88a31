#pragma once

#include "phasebar/error.hpp"
#include "phasebar/phase_type.hpp"
#include "phasebar/valuefn.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace phasebar {

/// Surplus dynamics: premium rate c, discount rate delta, Exponential(beta)
/// claim sizes, interclaim times driven by `environment`.
struct RiskModel {
    double premium_rate;
    double discount_rate;
    double claim_size_rate;
    PhaseTypeModel environment;

    static RiskModel make(double c, double delta, double beta, PhaseTypeModel env) {
        if (!(c > 0.0)) throw Error(ErrorCode::InvalidArgument, "premium rate c must be positive");
        if (!(delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "discount rate delta must be positive");
        if (!(beta > 0.0)) throw Error(ErrorCode::InvalidArgument, "claim size rate beta must be positive");
        return RiskModel{c, delta, beta, std::move(env)};
    }

    [[nodiscard]] std::size_t phases() const noexcept { return environment.size(); }
};

struct SolverConfig {
    double h = 1e-3;
    double x_max = 30.0;
    double tol = 1e-8;
    std::size_t max_iters = 10'000;
    double domain_growth = 1.5;
    int max_regrowths = 3;
    /// Report a quadratic-vertex estimate of each barrier next to the grid one.
    bool refine_barriers = true;
    /// Pointwise decrease between successive iterates that is tolerated before
    /// the solve aborts with InvariantViolation.
    double monotone_tol = 1e-12;

    void validate() const {
        if (!(tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tol must be positive");
        if (max_iters < 1) throw Error(ErrorCode::InvalidArgument, "max_iters must be >= 1");
        if (!(h > 0.0) || !(x_max > h)) throw Error(ErrorCode::InvalidArgument, "need 0 < h < x_max");
        if (!(domain_growth > 1.0)) throw Error(ErrorCode::InvalidArgument, "domain_growth must exceed 1");
    }
};

struct SolveResult {
    std::vector<double> barriers;       ///< refined b_i* (equal to grid_barriers when refinement is off)
    std::vector<double> grid_barriers;  ///< grid-located b_i*, the tail anchors of `values`
    std::vector<ValueFunction> values;  ///< V_1..V_n
    ValueFunction claim_value;          ///< V_{n+1}
    std::size_t iterations = 0;
    double final_sup_diff = 0.0;
    std::vector<std::vector<double>> barrier_history;  ///< grid barriers of every iterate
    double min_increment = 0.0;  ///< min over k, phases and grid points of V^{(k)} - V^{(k-1)}
    int regrowths = 0;

    [[nodiscard]] const Grid& grid() const noexcept { return claim_value.grid(); }
    [[nodiscard]] std::size_t phases() const noexcept { return values.size(); }
};

namespace detail {

inline double leave_plus_discount(const RiskModel& model, std::size_t i) {
    return model.environment.leave_rate(i) + model.discount_rate;
}

inline void check_function_set(const RiskModel& model, std::span<const ValueFunction> set) {
    if (set.size() != model.phases() + 1) {
        throw Error(ErrorCode::InvalidArgument,
                    "expected " + std::to_string(model.phases() + 1) + " functions (phases plus claim state)");
    }
    for (const auto& f : set) {
        if (!(f.grid() == set.front().grid())) throw Error(ErrorCode::GridMismatch, "function set on mixed grids");
    }
}

/// Grid values of sum_{j != i} lambda_ij V_j, with j = n meaning the claim state.
inline void coupling(const RiskModel& model, std::span<const ValueFunction> set, std::size_t i,
                     std::vector<double>& out) {
    const std::size_t n = model.phases();
    const std::size_t points = set.front().grid().points();
    out.assign(points, 0.0);
    for (std::size_t j = 0; j <= n; ++j) {
        if (j == i) continue;
        const double rate = model.environment.rate(i, j);
        if (rate == 0.0) continue;
        const auto v = set[j].values();
        for (std::size_t k = 0; k < points; ++k) out[k] += rate * v[k];
    }
}

/// Objective (c + g(x)) / (lambda_i + delta) - x at grid point k.
inline double barrier_objective(const RiskModel& model, std::size_t i, const Grid& grid,
                                std::span<const double> g, std::size_t k) {
    return (model.premium_rate + g[k]) / leave_plus_discount(model, i) - grid.x(k);
}

/// Grid argmax of the barrier objective, smallest index on ties.
inline std::size_t barrier_index(const RiskModel& model, std::size_t i, const Grid& grid, std::span<const double> g) {
    std::size_t best = 0;
    double best_value = barrier_objective(model, i, grid, g, 0);
    for (std::size_t k = 1; k < grid.points(); ++k) {
        const double v = barrier_objective(model, i, grid, g, k);
        if (v > best_value) {
            best_value = v;
            best = k;
        }
    }
    if (best == grid.cells()) {
        throw Error(ErrorCode::DomainTooSmall, "barrier of phase " + std::to_string(i + 1) +
                                                   " reached x_max = " + std::to_string(grid.x_max()));
    }
    return best;
}

/// Fills `out` with the barrier-strategy value for barrier index `kb`:
/// backward recurrence of the integral form below the barrier, slope one above.
inline void value_on_grid(const RiskModel& model, std::size_t i, const Grid& grid, std::span<const double> g,
                          std::size_t kb, std::vector<double>& out) {
    const double c = model.premium_rate;
    const double rate = leave_plus_discount(model, i);
    const KernelCell cell = KernelCell::make(rate / c, grid.h());
    out.resize(grid.points());
    const double at_barrier = (c + g[kb]) / rate;
    out[kb] = at_barrier;
    for (std::size_t k = kb; k-- > 0;) {
        out[k] = cell.decay * out[k + 1] + (cell.left * g[k] + cell.right * g[k + 1]) / c;
    }
    const double xb = grid.x(kb);
    for (std::size_t k = kb + 1; k < grid.points(); ++k) out[k] = at_barrier + (grid.x(k) - xb);
}

inline void claim_on_grid(const RiskModel& model, const Grid& grid, std::span<const ValueFunction> phases,
                          std::vector<double>& mix, std::vector<double>& out) {
    const std::size_t n = model.phases();
    const std::size_t points = grid.points();
    mix.assign(points, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = model.environment.restart()(static_cast<Eigen::Index>(i));
        if (w == 0.0) continue;
        const auto v = phases[i].values();
        for (std::size_t k = 0; k < points; ++k) mix[k] += w * v[k];
    }
    const double beta = model.claim_size_rate;
    const KernelCell cell = KernelCell::make(beta, grid.h());
    out.assign(points, 0.0);
    for (std::size_t k = 0; k + 1 < points; ++k) {
        out[k + 1] = cell.decay * out[k] + beta * (cell.left * mix[k + 1] + cell.right * mix[k]);
    }
}

inline double refine_barrier(const RiskModel& model, std::size_t i, const Grid& grid, std::span<const double> g,
                             std::size_t kb) {
    const double xb = grid.x(kb);
    if (kb == 0 || kb >= grid.cells()) return xb;
    const double lo = barrier_objective(model, i, grid, g, kb - 1);
    const double mid = barrier_objective(model, i, grid, g, kb);
    const double hi = barrier_objective(model, i, grid, g, kb + 1);
    const double curvature = lo - 2.0 * mid + hi;
    if (!(curvature < 0.0)) return xb;
    const double h = grid.h();
    const double offset = std::clamp(0.5 * h * (lo - hi) / curvature, -0.5 * h, 0.5 * h);
    return xb + offset;
}

}  // namespace detail

/// Grid point maximising (c + sum_{j != i} lambda_ij V_j(x)) / (lambda_i + delta) - x.
/// `previous` holds V_1..V_n followed by the claim-state function.
inline double barrier_step(const RiskModel& model, std::span<const ValueFunction> previous, std::size_t i) {
    model.environment.check_phase(i);
    detail::check_function_set(model, previous);
    std::vector<double> g;
    detail::coupling(model, previous, i, g);
    const Grid& grid = previous.front().grid();
    return grid.x(detail::barrier_index(model, i, grid, g));
}

/// Value of paying out above barrier `b` in phase i until the first environment
/// jump, after which `previous` is collected. `b` must be a grid point.
inline ValueFunction value_update(const RiskModel& model, std::span<const ValueFunction> previous, std::size_t i,
                                  double b) {
    model.environment.check_phase(i);
    detail::check_function_set(model, previous);
    const Grid& grid = previous.front().grid();
    if (!(b >= 0.0) || b > grid.x_max()) {
        throw Error(ErrorCode::QueryBeyondDomain, "barrier outside [0, x_max]");
    }
    const std::size_t kb = grid.nearest(b);
    if (std::abs(grid.x(kb) - b) > 1e-9 * grid.h()) {
        throw Error(ErrorCode::InvalidArgument, "barrier must be a grid point");
    }
    std::vector<double> g;
    detail::coupling(model, previous, i, g);
    std::vector<double> out;
    detail::value_on_grid(model, i, grid, g, kb, out);
    return ValueFunction(grid, std::move(out), grid.x(kb));
}

/// V_{n+1}(x) = beta e^{-beta x} int_0^x e^{beta y} sum_i pi_i V_i(y) dy on the grid.
inline ValueFunction claim_value(const RiskModel& model, std::span<const ValueFunction> phases) {
    if (phases.size() != model.phases()) {
        throw Error(ErrorCode::InvalidArgument, "claim_value needs one function per phase");
    }
    const Grid& grid = phases.front().grid();
    for (const auto& f : phases) {
        if (!(f.grid() == grid)) throw Error(ErrorCode::GridMismatch, "phase functions on mixed grids");
    }
    std::vector<double> mix;
    std::vector<double> out;
    detail::claim_on_grid(model, grid, phases, mix, out);
    return ValueFunction(grid, std::move(out));
}

namespace detail {

inline SolveResult solve_on_grid(const RiskModel& model, const SolverConfig& cfg, const Grid& grid) {
    const std::size_t n = model.phases();
    std::vector<ValueFunction> current(n + 1, ValueFunction::zero(grid));
    std::vector<double> g;
    std::vector<double> mix;
    std::vector<std::size_t> kb(n, 0);

    SolveResult result{.barriers = {},
                       .grid_barriers = {},
                       .values = {},
                       .claim_value = ValueFunction::zero(grid),
                       .iterations = 0,
                       .final_sup_diff = 0.0,
                       .barrier_history = {},
                       .min_increment = 0.0,
                       .regrowths = 0};

    for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter) {
        std::vector<ValueFunction> next;
        next.reserve(n + 1);
        for (std::size_t i = 0; i < n; ++i) {
            coupling(model, current, i, g);
            kb[i] = barrier_index(model, i, grid, g);
            std::vector<double> values;
            value_on_grid(model, i, grid, g, kb[i], values);
            next.emplace_back(grid, std::move(values), grid.x(kb[i]));
        }
        {
            std::vector<double> values;
            claim_on_grid(model, grid, std::span<const ValueFunction>(next.data(), n), mix, values);
            next.emplace_back(grid, std::move(values));
        }

        double diff = 0.0;
        double increment = 0.0;
        for (std::size_t j = 0; j <= n; ++j) {
            diff = std::max(diff, sup_norm_diff(next[j], current[j]));
            const auto a = next[j].values();
            const auto b = current[j].values();
            for (std::size_t k = 0; k < a.size(); ++k) increment = std::min(increment, a[k] - b[k]);
        }
        if (increment < -cfg.monotone_tol) {
            throw Error(ErrorCode::InvariantViolation,
                        "iterate " + std::to_string(iter) + " decreased by " + std::to_string(-increment));
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (!next[i].is_nondecreasing()) {
                throw Error(ErrorCode::InvariantViolation,
                            "value function of phase " + std::to_string(i + 1) + " is not nondecreasing");
            }
        }

        result.min_increment = std::min(result.min_increment, increment);
        std::vector<double> history(n);
        for (std::size_t i = 0; i < n; ++i) history[i] = grid.x(kb[i]);
        result.barrier_history.push_back(std::move(history));
        result.iterations = iter;
        result.final_sup_diff = diff;
        current = std::move(next);

        if (iter > 1 && diff < cfg.tol) {
            result.grid_barriers = result.barrier_history.back();
            result.barriers = result.grid_barriers;
            if (cfg.refine_barriers) {
                for (std::size_t i = 0; i < n; ++i) {
                    coupling(model, current, i, g);
                    result.barriers[i] = refine_barrier(model, i, grid, g, kb[i]);
                }
            }
            result.claim_value = current.back();
            current.pop_back();
            result.values = std::move(current);
            return result;
        }
    }
    throw Error(ErrorCode::MaxItersExceeded, "no convergence after " + std::to_string(cfg.max_iters) +
                                                 " iterations, final sup diff " +
                                                 std::to_string(result.final_sup_diff));
}

}  // namespace detail

/// Fixed-point iteration from V^{(0)} = 0 until the sup-norm change of all
/// n + 1 functions falls below cfg.tol. A barrier landing on x_max grows the
/// domain by cfg.domain_growth and restarts from zero.
inline SolveResult solve(const RiskModel& model, const SolverConfig& cfg = {}) {
    cfg.validate();
    double x_max = cfg.x_max;
    for (int attempt = 0;; ++attempt) {
        try {
            SolveResult result = detail::solve_on_grid(model, cfg, Grid::with_spacing(cfg.h, x_max));
            result.regrowths = attempt;
            return result;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::DomainTooSmall || attempt >= cfg.max_regrowths) throw;
            x_max *= cfg.domain_growth;
        }
    }
}

/// c V_i'(x) + sum_{j != i} lambda_ij V_j(x) - (lambda_i + delta) V_i(x).
/// Central differences in the interior, one-sided at 0 and at the barrier.
inline double hjb_residual(const RiskModel& model, const SolveResult& result, std::size_t i, double x) {
    model.environment.check_phase(i);
    const Grid& grid = result.grid();
    if (!(x >= 0.0) || x >= grid.x_max()) {
        throw Error(ErrorCode::QueryBeyondDomain, "hjb_residual needs 0 <= x < x_max");
    }
    const ValueFunction& v = result.values[i];
    const double h = grid.h();
    const double b = result.grid_barriers[i];
    double slope = 0.0;
    if (x < 0.5 * h) {
        slope = finite_difference(v, x, Stencil::Forward);
    } else if (std::abs(x - b) <= 0.5 * h) {
        slope = finite_difference(v, x, Stencil::Backward);
    } else {
        slope = finite_difference(v, x, Stencil::Central);
    }
    const std::size_t n = model.phases();
    double coupled = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (j != i) coupled += model.environment.rate(i, j) * result.values[j].eval(x);
    }
    coupled += model.environment.rate(i, n) * result.claim_value.eval(x);
    return model.premium_rate * slope + coupled - detail::leave_plus_discount(model, i) * v.eval(x);
}

}  // namespace phasebar
