#pragma once

#include "phasebar/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace phasebar {

/// Uniform grid x_k = k h on [0, x_max], k = 0..cells.
class Grid {
public:
    Grid(double x_max, std::size_t cells) : x_max_(x_max), cells_(cells) {
        if (!(x_max > 0.0) || !std::isfinite(x_max) || cells == 0) {
            throw Error(ErrorCode::InvalidArgument, "grid needs x_max > 0 and at least one cell");
        }
        h_ = x_max / static_cast<double>(cells);
    }

    /// Grid whose spacing is `h` and whose right end is the first multiple of h at or above x_max.
    static Grid with_spacing(double h, double x_max) {
        if (!(h > 0.0) || !(x_max > 0.0)) {
            throw Error(ErrorCode::InvalidArgument, "grid needs h > 0 and x_max > 0");
        }
        const auto cells = static_cast<std::size_t>(std::ceil(x_max / h - 1e-9));
        return Grid(static_cast<double>(cells) * h, std::max<std::size_t>(cells, 1));
    }

    [[nodiscard]] double x_max() const noexcept { return x_max_; }
    [[nodiscard]] double h() const noexcept { return h_; }
    [[nodiscard]] std::size_t cells() const noexcept { return cells_; }
    [[nodiscard]] std::size_t points() const noexcept { return cells_ + 1; }
    [[nodiscard]] double x(std::size_t k) const noexcept {
        return k == cells_ ? x_max_ : static_cast<double>(k) * h_;
    }

    /// Nearest grid index to x (clamped into range).
    [[nodiscard]] std::size_t nearest(double x) const noexcept {
        if (!(x > 0.0)) return 0;
        const double pos = std::round(x / h_);
        return pos >= static_cast<double>(cells_) ? cells_ : static_cast<std::size_t>(pos);
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    double x_max_;
    std::size_t cells_;
    double h_ = 0.0;
};

namespace detail {

/// (1 - e^{-z}) / z for z >= 0.
inline double phi1(double z) {
    if (z == 0.0) return 1.0;
    return -std::expm1(-z) / z;
}

/// (1 - e^{-z}(1 + z)) / z^2 for z >= 0. Series near zero, where the closed
/// form cancels catastrophically.
inline double phi2(double z) {
    if (z < 0.1) {
        // sum_k (-z)^k (k+1) / (k+2)!
        double term = 0.5;
        double sum = 0.0;
        for (int k = 0; k < 14; ++k) {
            sum += term;
            term *= -z * static_cast<double>(k + 2) / (static_cast<double>(k + 1) * static_cast<double>(k + 3));
        }
        return sum;
    }
    return (-std::expm1(-z) - z * std::exp(-z)) / (z * z);
}

/// Exact integral of e^{-a s} (f0 + (f1 - f0) s / len) over s in [0, len].
inline double linear_segment_integral(double a, double len, double f0, double f1) {
    const double z = a * len;
    return len * (f0 * phi1(z) + (f1 - f0) * phi2(z));
}

}  // namespace detail

/// Weights of the one-cell exponential kernel:
/// integral over [0, h] of e^{-a s} g(x_k + s) ds == left * g_k + right * g_{k+1}
/// for the linear interpolant of g, and decay == e^{-a h}.
struct KernelCell {
    double decay;
    double left;
    double right;

    static KernelCell make(double a, double h) {
        const double z = a * h;
        const double p1 = detail::phi1(z);
        const double p2 = detail::phi2(z);
        return {std::exp(-z), h * (p1 - p2), h * p2};
    }
};

/// Piecewise-linear function on a Grid, optionally continued with slope one
/// to the right of `tail_anchor`.
class ValueFunction {
public:
    static constexpr double monotone_slack = 1e-9;

    ValueFunction(Grid grid, std::vector<double> values, std::optional<double> tail_anchor = std::nullopt)
        : grid_(grid), values_(std::move(values)), tail_anchor_(tail_anchor) {
        if (values_.size() != grid_.points()) {
            throw Error(ErrorCode::GridMismatch, "expected " + std::to_string(grid_.points()) + " values, got " +
                                                     std::to_string(values_.size()));
        }
        for (double v : values_) {
            if (!std::isfinite(v) || v < 0.0) {
                throw Error(ErrorCode::InvariantViolation, "value function entries must be finite and nonnegative");
            }
        }
        if (tail_anchor_ && !(*tail_anchor_ >= 0.0 && *tail_anchor_ <= grid_.x_max())) {
            throw Error(ErrorCode::InvalidArgument, "tail anchor outside [0, x_max]");
        }
    }

    static ValueFunction zero(Grid grid) { return ValueFunction(grid, std::vector<double>(grid.points(), 0.0)); }

    [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] double operator[](std::size_t k) const noexcept { return values_[k]; }
    [[nodiscard]] std::optional<double> tail_anchor() const noexcept { return tail_anchor_; }

    [[nodiscard]] double eval(double x) const {
        if (!(x >= 0.0)) {
            throw Error(ErrorCode::QueryBeyondDomain, "negative argument " + std::to_string(x));
        }
        if (tail_anchor_ && x > *tail_anchor_) {
            return interpolate(*tail_anchor_) + (x - *tail_anchor_);
        }
        if (x > grid_.x_max() * (1.0 + 1e-12)) {
            throw Error(ErrorCode::QueryBeyondDomain,
                        "x = " + std::to_string(x) + " beyond x_max = " + std::to_string(grid_.x_max()));
        }
        return interpolate(std::min(x, grid_.x_max()));
    }

    [[nodiscard]] double operator()(double x) const { return eval(x); }

    /// values[k+1] >= values[k] - slack * h everywhere.
    [[nodiscard]] bool is_nondecreasing(double slack = monotone_slack) const noexcept {
        const double tol = slack * grid_.h();
        for (std::size_t k = 0; k + 1 < values_.size(); ++k) {
            if (values_[k + 1] < values_[k] - tol) return false;
        }
        return true;
    }

private:
    [[nodiscard]] double interpolate(double x) const noexcept {
        const double pos = x / grid_.h();
        auto k = static_cast<std::size_t>(pos);
        if (k >= grid_.cells()) k = grid_.cells() - 1;
        const double w = pos - static_cast<double>(k);
        return (1.0 - w) * values_[k] + w * values_[k + 1];
    }

    Grid grid_;
    std::vector<double> values_;
    std::optional<double> tail_anchor_;
};

/// Integral of e^{-a (u - x)} f(u) over [x, b], exact for the piecewise-linear
/// interpolant (and its slope-one tail).
inline double exp_kernel_integral(const ValueFunction& f, double x, double b, double a) {
    if (!(x >= 0.0) || !(b >= x)) {
        throw Error(ErrorCode::QueryBeyondDomain, "need 0 <= x <= b");
    }
    if (!(a > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "kernel rate must be positive");
    }
    const Grid& g = f.grid();
    if (b > g.x_max() * (1.0 + 1e-12) && !f.tail_anchor()) {
        throw Error(ErrorCode::QueryBeyondDomain, "upper limit beyond x_max without a tail");
    }
    if (b == x) return 0.0;

    // Breakpoints: x, interior grid points, the tail anchor, b.
    std::vector<double> knots{x};
    const auto first = static_cast<std::size_t>(std::floor(x / g.h())) + 1;
    for (std::size_t k = first; k <= g.cells() && g.x(k) < b; ++k) {
        if (g.x(k) > x) knots.push_back(g.x(k));
    }
    if (auto anchor = f.tail_anchor(); anchor && *anchor > x && *anchor < b) {
        knots.push_back(*anchor);
        std::sort(knots.begin(), knots.end());
    }
    knots.push_back(b);

    double total = 0.0;
    double left_value = f.eval(knots.front());
    for (std::size_t s = 0; s + 1 < knots.size(); ++s) {
        const double u0 = knots[s];
        const double u1 = knots[s + 1];
        const double right_value = f.eval(u1);
        if (u1 > u0) {
            total += std::exp(-a * (u0 - x)) * detail::linear_segment_integral(a, u1 - u0, left_value, right_value);
        }
        left_value = right_value;
    }
    return total;
}

/// max |f - g| over the grid; when both carry tails the constant offset of the
/// two slope-one continuations is included.
inline double sup_norm_diff(const ValueFunction& f, const ValueFunction& g) {
    if (!(f.grid() == g.grid())) {
        throw Error(ErrorCode::GridMismatch, "sup_norm_diff on different grids");
    }
    double diff = 0.0;
    const auto fv = f.values();
    const auto gv = g.values();
    for (std::size_t k = 0; k < fv.size(); ++k) {
        diff = std::max(diff, std::abs(fv[k] - gv[k]));
    }
    if (f.tail_anchor() && g.tail_anchor()) {
        const double bf = *f.tail_anchor();
        const double bg = *g.tail_anchor();
        diff = std::max(diff, std::abs((f.eval(bf) - bf) - (g.eval(bg) - bg)));
    }
    return diff;
}

enum class Stencil { Central, Forward, Backward };

/// First derivative with step h = grid spacing. The one-sided stencils are
/// second order (three points) so that they match the central one in accuracy.
inline double finite_difference(const ValueFunction& f, double x, Stencil stencil) {
    const double h = f.grid().h();
    switch (stencil) {
        case Stencil::Central:
            return (f.eval(x + h) - f.eval(x - h)) / (2.0 * h);
        case Stencil::Forward:
            return (-3.0 * f.eval(x) + 4.0 * f.eval(x + h) - f.eval(x + 2.0 * h)) / (2.0 * h);
        case Stencil::Backward:
            if (x < 2.0 * h) return (f.eval(x) - f.eval(x - h)) / h;
            return (3.0 * f.eval(x) - 4.0 * f.eval(x - h) + f.eval(x - 2.0 * h)) / (2.0 * h);
    }
    return 0.0;
}

/// Largest second difference (f[k-1] - 2 f[k] + f[k+1]) / h^2 over interior
/// grid points in [lo, hi]. Returns -infinity when no interior point qualifies.
inline double second_difference_max(const ValueFunction& f, double lo, double hi) {
    const Grid& g = f.grid();
    if (!(lo >= 0.0) || !(hi >= lo) || hi > g.x_max() * (1.0 + 1e-12)) {
        throw Error(ErrorCode::QueryBeyondDomain, "need 0 <= lo <= hi <= x_max");
    }
    const double h = g.h();
    const double eps = 1e-9 * h;
    const auto v = f.values();
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < g.cells(); ++k) {
        const double xk = g.x(k);
        if (xk < lo - eps || xk > hi + eps) continue;
        worst = std::max(worst, (v[k - 1] - 2.0 * v[k] + v[k + 1]) / (h * h));
    }
    return worst;
}

}  // namespace phasebar
