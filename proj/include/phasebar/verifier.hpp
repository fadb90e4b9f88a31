#pragma once

#include "phasebar/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace phasebar {

enum class CheckStatus { Pass, Fail, Skipped };

constexpr std::string_view to_string(CheckStatus s) noexcept {
    switch (s) {
        case CheckStatus::Pass: return "PASS";
        case CheckStatus::Fail: return "FAIL";
        case CheckStatus::Skipped: return "SKIPPED";
    }
    return "?";
}

struct CheckRecord {
    std::string name;
    CheckStatus status = CheckStatus::Pass;
    double measured = 0.0;
    double tolerance = 0.0;
    std::optional<std::size_t> phase;  ///< 0-based phase of the worst violation
    std::optional<double> x;           ///< location of the worst violation
    std::string detail;

    [[nodiscard]] bool passed() const noexcept { return status != CheckStatus::Fail; }
};

struct VerificationReport {
    std::vector<CheckRecord> checks;

    [[nodiscard]] bool passed() const noexcept {
        return std::all_of(checks.begin(), checks.end(), [](const CheckRecord& c) { return c.passed(); });
    }
    [[nodiscard]] const CheckRecord* find(std::string_view name) const noexcept {
        for (const auto& c : checks) {
            if (c.name == name) return &c;
        }
        return nullptr;
    }
};

/// Tolerances default to the values the acceptance suite runs with; tighten
/// them together with the grid spacing.
struct Tolerances {
    double smooth_fit = 5e-3;         ///< |V_i'(b_i) - 1|
    double curvature = 1e-3;          ///< |second difference of V_i at b_i|
    double hjb_below = 1e-4;          ///< relative to the phase's value at its barrier
    double hjb_above = 1e-4;          ///< absolute upper bound of the residual above b_i
    double slope_below = 1e-4;        ///< V_i' >= 1 - slope_below on (0, b_i)
    double lower_bound = 1e-6;        ///< V_i >= (c + sum lambda_ij V_j) / (lambda_i + delta) - lower_bound
    double exit_slope = 5e-3;         ///< V_{n+1}'(b_max) against 1 + delta / t_p
    double concavity = 1e-6;          ///< max second difference on [b_low, x_max]
    double barrier_tie_cells = 2.0;   ///< barriers closer than this many h count as equal
};

namespace detail {

inline double tie_width(const SolveResult& r, const Tolerances& tol) { return tol.barrier_tie_cells * r.grid().h(); }

inline CheckRecord make_record(std::string name, double measured, double tolerance, bool ok) {
    CheckRecord c;
    c.name = std::move(name);
    c.measured = measured;
    c.tolerance = tolerance;
    c.status = ok ? CheckStatus::Pass : CheckStatus::Fail;
    return c;
}

inline CheckRecord skipped(std::string name, std::string reason) {
    CheckRecord c;
    c.name = std::move(name);
    c.status = CheckStatus::Skipped;
    c.detail = std::move(reason);
    return c;
}

inline std::size_t barrier_grid_index(const SolveResult& r, std::size_t i) {
    return r.grid().nearest(r.grid_barriers[i]);
}

inline double coupled_value(const RiskModel& model, const SolveResult& r, std::size_t i, std::size_t k) {
    const std::size_t n = model.phases();
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (j != i) sum += model.environment.rate(i, j) * r.values[j][k];
    }
    return sum + model.environment.rate(i, n) * r.claim_value[k];
}

inline std::string phase_list(const std::vector<std::size_t>& phases) {
    std::string s = "{";
    for (std::size_t k = 0; k < phases.size(); ++k) {
        if (k) s += ",";
        s += std::to_string(phases[k] + 1);
    }
    return s + "}";
}

}  // namespace detail

/// |V_i'(b_i) - 1| with the left-sided stencil at interior barriers and the
/// right-sided one at b_i = 0.
inline CheckRecord check_smooth_fit(const RiskModel& model, const SolveResult& r, const Tolerances& tol = {}) {
    CheckRecord worst = detail::make_record("smooth_fit", 0.0, tol.smooth_fit, true);
    for (std::size_t i = 0; i < model.phases(); ++i) {
        const double b = r.grid_barriers[i];
        const double slope = b > 0.0 ? finite_difference(r.values[i], b, Stencil::Backward)
                                     : finite_difference(r.values[i], b, Stencil::Forward);
        const double err = std::abs(slope - 1.0);
        if (err >= worst.measured) {
            worst.measured = err;
            worst.phase = i;
            worst.x = b;
        }
    }
    worst.status = worst.measured <= tol.smooth_fit ? CheckStatus::Pass : CheckStatus::Fail;
    return worst;
}

/// Second difference at each positive barrier, which should vanish.
inline CheckRecord check_barrier_curvature(const RiskModel& model, const SolveResult& r, const Tolerances& tol = {}) {
    CheckRecord worst = detail::make_record("barrier_curvature", 0.0, tol.curvature, true);
    const double h = r.grid().h();
    bool any = false;
    for (std::size_t i = 0; i < model.phases(); ++i) {
        const std::size_t k = detail::barrier_grid_index(r, i);
        if (k == 0) continue;
        any = true;
        const auto v = r.values[i].values();
        const double d2 = std::abs((v[k - 1] - 2.0 * v[k] + v[k + 1]) / (h * h));
        if (d2 >= worst.measured) {
            worst.measured = d2;
            worst.phase = i;
            worst.x = r.grid_barriers[i];
        }
    }
    if (!any) return detail::skipped("barrier_curvature", "all barriers are zero");
    worst.status = worst.measured <= tol.curvature ? CheckStatus::Pass : CheckStatus::Fail;
    return worst;
}

/// The ODE holds below every barrier: |residual| <= tol * V_i(b_i).
inline CheckRecord check_hjb_below(const RiskModel& model, const SolveResult& r, const Tolerances& tol = {}) {
    CheckRecord worst = detail::make_record("hjb_below_barrier", 0.0, tol.hjb_below, true);
    double worst_ratio = 0.0;
    const Grid& grid = r.grid();
    for (std::size_t i = 0; i < model.phases(); ++i) {
        const std::size_t kb = detail::barrier_grid_index(r, i);
        const double scale = std::max(1.0, r.values[i][kb]);
        for (std::size_t k = 0; k <= kb; ++k) {
            const double res = std::abs(hjb_residual(model, r, i, grid.x(k)));
            if (res / scale >= worst_ratio) {
                worst_ratio = res / scale;
                worst.measured = res / scale;
                worst.phase = i;
                worst.x = grid.x(k);
            }
        }
    }
    worst.detail = "residual relative to V_i(b_i)";
    worst.status = worst.measured <= tol.hjb_below ? CheckStatus::Pass : CheckStatus::Fail;
    return worst;
}

/// Above every barrier the generator term is nonpositive.
inline CheckRecord check_hjb_above(const RiskModel& model, const SolveResult& r, const Tolerances& tol = {}) {
    CheckRecord worst = detail::make_record("hjb_above_barrier", -std::numeric_limits<double>::infinity(),
                                            tol.hjb_above, true);
    const Grid& grid = r.grid();
    for (std::size_t i = 0; i < model.phases(); ++i) {
        const std::size_t kb = detail::barrier_grid_index(r, i);
        for (std::size_t k = kb + 1; k < grid.cells(); ++k) {
            const double res = hjb_residual(model, r, i, grid.x(k));
            if (res > worst.measured) {
                worst.measured = res;
                worst.phase = i;
                worst.x = grid.x(k);
            }
        }
    }
    if (!std::isfinite(worst.measured)) return detail::skipped("hjb_above_barrier", "no grid point above a barrier");
    worst.status = worst.measured <= tol.hjb_above ? CheckStatus::Pass : CheckStatus::Fail;
    return worst;
}

/// Forward-difference slope on (0, b_i) stays at or above one.
inline CheckRecord check_slope_below(const RiskModel& model, const SolveResult& r, const Tolerances& tol = {}) {
    CheckRecord worst = detail::make_record("slope_below_barrier", std::numeric_limits<double>::infinity(),
                                            1.0 - tol.slope_below, true);
    const double h = r.grid().h();
    for (std::size_t i = 0; i < model.phases(); ++i) {
        const std::size_t kb = detail::barrier_grid_index(r, i);
        const auto v = r.values[i].values();
        for (std::size_t k = 0; k < kb; ++k) {
            const double s = (v[k + 1] - v[k]) / h;
            if (s < worst.measured) {
                worst.measured = s;
                worst.phase = i;
                worst.x = r.grid().x(k);
            }
        }
    }
    if (!std::isfinite(worst.measured)) return detail::skipped("slope_below_barrier", "all barriers are zero");
    worst.status = worst.measured >= 1.0 - tol.slope_below ? CheckStatus::Pass : CheckStatus::Fail;
    return worst;
}

/// Paying the premium out until the next jump is never better than the barrier
/// strategy: V_i(x) >= (c + sum_{j != i} lambda_ij V_j(x)) / (lambda_i + delta) below b_i.
inline CheckRecord check_lower_bound(const RiskModel& model, const SolveResult& r, const Tolerances& tol = {}) {
    CheckRecord worst = detail::make_record("lower_bound_below_barrier", std::numeric_limits<double>::infinity(),
                                            -tol.lower_bound, true);
    for (std::size_t i = 0; i < model.phases(); ++i) {
        const std::size_t kb = detail::barrier_grid_index(r, i);
        const double rate = model.environment.leave_rate(i) + model.discount_rate;
        for (std::size_t k = 0; k < kb; ++k) {
            const double gap =
                r.values[i][k] - (model.premium_rate + detail::coupled_value(model, r, i, k)) / rate;
            if (gap < worst.measured) {
                worst.measured = gap;
                worst.phase = i;
                worst.x = r.grid().x(k);
            }
        }
    }
    if (!std::isfinite(worst.measured)) return detail::skipped("lower_bound_below_barrier", "all barriers are zero");
    worst.status = worst.measured >= -tol.lower_bound ? CheckStatus::Pass : CheckStatus::Fail;
    return worst;
}

/// V_i(x) <= x + c / delta on the grid.
inline CheckRecord check_upper_bound(const RiskModel& model, const SolveResult& r, const Tolerances& = {}) {
    CheckRecord worst = detail::make_record("upper_bound", -std::numeric_limits<double>::infinity(), 0.0, true);
    const double cap = model.premium_rate / model.discount_rate;
    for (std::size_t i = 0; i < model.phases(); ++i) {
        const auto v = r.values[i].values();
        for (std::size_t k = 0; k < v.size(); ++k) {
            const double excess = v[k] - r.grid().x(k) - cap;
            if (excess > worst.measured) {
                worst.measured = excess;
                worst.phase = i;
                worst.x = r.grid().x(k);
            }
        }
    }
    worst.status = worst.measured <= 0.0 ? CheckStatus::Pass : CheckStatus::Fail;
    return worst;
}

inline CheckRecord check_monotone_values(const RiskModel& model, const SolveResult& r, const Tolerances& = {}) {
    CheckRecord c = detail::make_record("nondecreasing_values", 0.0, ValueFunction::monotone_slack, true);
    for (std::size_t i = 0; i < model.phases(); ++i) {
        if (!r.values[i].is_nondecreasing()) {
            c.status = CheckStatus::Fail;
            c.phase = i;
        }
    }
    if (!r.claim_value.is_nondecreasing()) {
        c.status = CheckStatus::Fail;
        c.detail = "claim-state function decreases";
    }
    return c;
}

/// Phases sharing the highest barrier must share the highest claim intensity.
/// For two phases, b_1 < b_2 (strictly, beyond the tie width) requires t_2 > t_1.
inline CheckRecord check_ordering(const RiskModel& model, const SolveResult& r, const Tolerances& tol = {}) {
    const std::size_t n = model.phases();
    const auto& t = model.environment.exit();
    const double tie = detail::tie_width(r, tol);
    const double b_max = *std::max_element(r.grid_barriers.begin(), r.grid_barriers.end());
    const double t_max = t.maxCoeff();

    std::vector<std::size_t> top_barrier;
    for (std::size_t i = 0; i < n; ++i) {
        if (r.grid_barriers[i] >= b_max - tie) top_barrier.push_back(i);
    }
    CheckRecord c = detail::make_record("ordering", b_max, tie, true);
    for (std::size_t i : top_barrier) {
        if (t(static_cast<Eigen::Index>(i)) < t_max) {
            c.status = CheckStatus::Fail;
            c.phase = i;
            c.x = r.grid_barriers[i];
        }
    }
    c.detail = "highest barrier phases " + detail::phase_list(top_barrier);
    if (n == 2) {
        const double b1 = r.grid_barriers[0];
        const double b2 = r.grid_barriers[1];
        const bool lower_first = b1 < b2 - tie;
        const bool lower_second = b2 < b1 - tie;
        if ((lower_first && !(t(1) > t(0))) || (lower_second && !(t(0) > t(1)))) {
            c.status = CheckStatus::Fail;
        }
        if ((lower_first && b1 <= tie) || (lower_second && b2 <= tie)) {
            c.detail += "; lower barrier is zero (ordering applied anyway)";
        }
    }
    return c;
}

/// V_{n+1}'(b_max) = 1 + delta / t_p for a phase p with the highest barrier,
/// and V_{n+1}'(b_max) <= 1 + delta / t_i for every other phase with t_i > 0.
inline CheckRecord check_exit_slope_identity(const RiskModel& model, const SolveResult& r,
                                             const Tolerances& tol = {}) {
    const std::size_t n = model.phases();
    const auto& t = model.environment.exit();
    const double tie = detail::tie_width(r, tol);
    const double b_max = *std::max_element(r.grid_barriers.begin(), r.grid_barriers.end());

    std::size_t p = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (r.grid_barriers[i] >= b_max - tie && (p == n || t(static_cast<Eigen::Index>(i)) > t(static_cast<Eigen::Index>(p)))) {
            p = i;
        }
    }
    const double tp = t(static_cast<Eigen::Index>(p));
    if (!(tp > 0.0)) {
        return detail::skipped("exit_slope_identity", "SkippedZeroIntensity: highest-barrier phase has t = 0");
    }
    if (!(b_max > 0.0)) {
        return detail::skipped("exit_slope_identity", "all barriers are zero");
    }
    const double slope = finite_difference(r.claim_value, b_max, Stencil::Central);
    const double target = 1.0 + model.discount_rate / tp;
    CheckRecord c = detail::make_record("exit_slope_identity", std::abs(slope - target), tol.exit_slope, true);
    c.phase = p;
    c.x = b_max;
    c.detail = "V_{n+1}'(b_max) = " + std::to_string(slope) + ", 1 + delta/t_p = " + std::to_string(target);
    if (c.measured > tol.exit_slope) c.status = CheckStatus::Fail;
    for (std::size_t i = 0; i < n; ++i) {
        const double ti = t(static_cast<Eigen::Index>(i));
        if (i == p || !(ti > 0.0)) continue;
        if (slope > 1.0 + model.discount_rate / ti + tol.exit_slope) {
            c.status = CheckStatus::Fail;
            c.detail += "; inequality violated for phase " + std::to_string(i + 1);
        }
    }
    return c;
}

/// Two phases with b_low < b_high: the higher-barrier value function is concave on [b_low, x_max].
inline CheckRecord check_concavity_2order(const RiskModel& model, const SolveResult& r,
                                          const Tolerances& tol = {}) {
    if (model.phases() != 2) return detail::skipped("concavity_2order", "only stated for two phases");
    const double tie = detail::tie_width(r, tol);
    const double b1 = r.grid_barriers[0];
    const double b2 = r.grid_barriers[1];
    if (std::abs(b1 - b2) <= tie) return detail::skipped("concavity_2order", "barriers are equal");
    const std::size_t high = b1 < b2 ? 1 : 0;
    const double lo = std::min(b1, b2);
    const double worst = second_difference_max(r.values[high], lo, r.grid().x_max());
    CheckRecord c = detail::make_record("concavity_2order", worst, tol.concavity, worst <= tol.concavity);
    c.phase = high;
    c.x = lo;
    c.detail = "interval [" + std::to_string(lo) + ", " + std::to_string(r.grid().x_max()) + "]";
    return c;
}

/// Two phases: a strictly lower barrier in phase 1 implies a longer expected
/// time to the next claim from phase 1 (and symmetrically).
inline CheckRecord check_time_ordering(const RiskModel& model, const SolveResult& r, const Tolerances& tol = {}) {
    if (model.phases() != 2) return detail::skipped("time_ordering", "only stated for two phases");
    const double tie = detail::tie_width(r, tol);
    const double b1 = r.grid_barriers[0];
    const double b2 = r.grid_barriers[1];
    const double t1 = expected_time_to_claim(model.environment, 0);
    const double t2 = expected_time_to_claim(model.environment, 1);
    bool ok = true;
    if (b1 < b2 - tie) ok = t1 >= t2;
    if (b2 < b1 - tie) ok = t2 >= t1;
    CheckRecord c = detail::make_record("time_ordering", t1 - t2, 0.0, ok);
    c.detail = "T_1 = " + std::to_string(t1) + ", T_2 = " + std::to_string(t2);
    if (std::abs(b1 - b2) <= tie) c.detail += " (barriers equal, vacuous)";
    return c;
}

/// Runs every check; order is fixed so reports diff cleanly.
inline VerificationReport verify_all(const RiskModel& model, const SolveResult& r, const Tolerances& tol = {}) {
    VerificationReport report;
    report.checks.push_back(check_smooth_fit(model, r, tol));
    report.checks.push_back(check_barrier_curvature(model, r, tol));
    report.checks.push_back(check_hjb_below(model, r, tol));
    report.checks.push_back(check_hjb_above(model, r, tol));
    report.checks.push_back(check_slope_below(model, r, tol));
    report.checks.push_back(check_lower_bound(model, r, tol));
    report.checks.push_back(check_upper_bound(model, r, tol));
    report.checks.push_back(check_monotone_values(model, r, tol));
    report.checks.push_back(check_ordering(model, r, tol));
    report.checks.push_back(check_exit_slope_identity(model, r, tol));
    report.checks.push_back(check_concavity_2order(model, r, tol));
    report.checks.push_back(check_time_ordering(model, r, tol));
    return report;
}

}  // namespace phasebar
