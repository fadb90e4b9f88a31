#include "test_support.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <thread>

using namespace phasebar;
using phasebar::testing::matrix;
using phasebar::testing::table_model;
using phasebar::testing::table_solution;
using phasebar::testing::vector;
using Catch::Approx;

namespace {

unsigned worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

RiskModel one_phase(double lambda, double c) {
    return RiskModel::make(c, 0.1, 1.0, PhaseTypeModel::validate(matrix({{-lambda}}), vector({1.0})));
}

bool within(const SimEstimate& e, double target, double sigmas = 3.0) {
    return std::abs(e.mean - target) <= sigmas * e.std_error + e.truncation_bound;
}

}  // namespace

TEST_CASE("barrier zero in one phase pays premiums until the first claim", "[simulator][oracle]") {
    const RiskModel model = one_phase(3.0, 5.0);
    const std::vector<double> b{0.0};
    const auto est = estimate_value(model, b, 2.0, 0, {.paths = 50'000, .threads = worker_count()});
    INFO("mean " << est.mean << " se " << est.std_error);
    CHECK(within(est, 2.0 + 5.0 / 3.1));
}

TEST_CASE("one-phase barrier strategy matches the closed form", "[simulator][oracle]") {
    // Roots of c r^2 + (c beta - lambda - delta) r - beta delta = 0, lambda = 3, c = 5.
    const double bq = 5.0 - 3.1;
    const double disc = std::sqrt(bq * bq + 4.0 * 5.0 * 0.1);
    const double r1 = (-bq + disc) / 10.0, r2 = (-bq - disc) / 10.0;
    const auto h = [&](double x) { return (r1 + 1) * std::exp(r1 * x) - (r2 + 1) * std::exp(r2 * x); };
    const auto dh = [&](double x) { return (r1 + 1) * r1 * std::exp(r1 * x) - (r2 + 1) * r2 * std::exp(r2 * x); };
    const double barrier = 3.0;
    const double x0 = 1.0;
    const auto est = estimate_value(one_phase(3.0, 5.0), std::vector<double>{barrier}, x0, 0,
                                    {.paths = 100'000, .threads = worker_count()});
    INFO("mean " << est.mean << " se " << est.std_error);
    CHECK(within(est, h(x0) / dh(barrier)));
}

TEST_CASE("ruin at the first claim with zero barriers", "[simulator][oracle]") {
    // alpha (delta I - T)^{-1} t is the Laplace transform of the time to the first claim.
    const RiskModel model = table_model(1);
    const auto& env = model.environment;
    const Eigen::MatrixXd a = 0.1 * Eigen::MatrixXd::Identity(2, 2) - env.subintensity();
    const Eigen::VectorXd lt = a.fullPivLu().solve(env.exit());
    for (std::size_t phase : {0u, 1u}) {
        const double expected = model.premium_rate * (1.0 - lt(Eigen::Index(phase))) / model.discount_rate;
        const auto est = estimate_value(model, std::vector<double>{0.0, 0.0}, 0.0, phase,
                                        {.paths = 50'000, .threads = worker_count()});
        INFO("phase " << phase << " mean " << est.mean << " se " << est.std_error << " expected " << expected);
        CHECK(within(est, expected));
    }
}

TEST_CASE("every path respects the dividend bound", "[simulator][property]") {
    const RiskModel model = table_model(5);
    const std::vector<double> b{8.9, 9.55, 8.27, 7.1};
    const double bound = 4.0 + model.premium_rate / model.discount_rate;
    for (std::uint64_t k = 0; k < 5000; ++k) {
        PathStreams s = PathStreams::for_path(77, k);
        const double total = simulate_path(model, b, 4.0, k % 4, 200.0, s);
        REQUIRE(total >= 0.0);
        REQUIRE(total <= bound);
    }
}

TEST_CASE("vanishing horizon pays nothing below the barrier", "[simulator]") {
    const RiskModel model = table_model(1);
    const std::vector<double> b{11.78, 12.22};
    const auto est = estimate_value(model, b, 3.0, 0, {.paths = 1000, .horizon = 1e-9});
    CHECK(est.mean <= model.premium_rate * 1e-9);
    CHECK(est.truncation_bound == Approx(3.0 + 150.0).epsilon(1e-6));

    // Above the barrier the excess is paid at time zero.
    const auto lump = estimate_value(model, b, 20.0, 0, {.paths = 10, .horizon = 1e-9});
    CHECK(lump.mean == Approx(20.0 - 11.78).margin(1e-6));
}

TEST_CASE("estimates are reproducible and thread-invariant", "[simulator]") {
    const RiskModel model = table_model(3);
    const std::vector<double> b{9.62, 10.26, 9.28};
    const SimConfig single{.paths = 4001, .seed = 9, .threads = 1};
    SimConfig many = single;
    many.threads = 7;
    const auto a = estimate_value(model, b, 5.0, 1, single);
    const auto c = estimate_value(model, b, 5.0, 1, single);
    const auto d = estimate_value(model, b, 5.0, 1, many);
    CHECK(a.mean == c.mean);
    CHECK(a.mean == d.mean);
    CHECK(a.std_error == d.std_error);

    SimConfig other = single;
    other.seed = 10;
    CHECK(estimate_value(model, b, 5.0, 1, other).mean != a.mean);
}

TEST_CASE("antithetic estimate agrees with plain sampling", "[simulator]") {
    const RiskModel model = table_model(1);
    const std::vector<double> b{11.78, 12.22};
    const auto plain = estimate_value(model, b, 2.0, 0, {.paths = 20'000, .threads = worker_count()});
    const auto anti =
        estimate_value(model, b, 2.0, 0, {.paths = 20'000, .antithetic = true, .threads = worker_count()});
    const double se = std::hypot(plain.std_error, anti.std_error);
    CHECK(std::abs(plain.mean - anti.mean) <= 3.0 * se);
    CHECK_THROWS_AS(estimate_value(model, b, 2.0, 0, {.paths = 3, .antithetic = true}), Error);
}

TEST_CASE("mirrored engine complements the raw output", "[simulator]") {
    std::mt19937_64 a(1), b(1);
    Mirrored<std::mt19937_64> m(b);
    for (int k = 0; k < 10; ++k) CHECK(m() == ~a());
}

TEST_CASE("value grows with the initial surplus", "[simulator][property]") {
    const RiskModel model = table_model(5);
    const std::vector<double> b{8.9, 9.55, 8.27, 7.1};
    double prev = -1.0;
    double prev_se = 0.0;
    for (double x0 : {0.0, 2.0, 4.0, 6.0}) {
        const auto est = estimate_value(model, b, x0, 0, {.paths = 20'000, .threads = worker_count()});
        CHECK(est.mean >= prev - 3.0 * std::hypot(est.std_error, prev_se));
        prev = est.mean;
        prev_se = est.std_error;
    }
}

TEST_CASE("solver barriers are locally optimal under simulation", "[simulator][property]") {
    const RiskModel model = table_model(1);
    const SolveResult& r = table_solution(1);
    const SimConfig cfg{.paths = 20'000, .threads = worker_count()};
    const auto best = estimate_value(model, r.barriers, 5.0, 0, cfg);
    for (std::size_t i = 0; i < 2; ++i) {
        for (double shift : {-0.5, 0.5}) {
            std::vector<double> b = r.barriers;
            b[i] += shift;
            const auto alt = estimate_value(model, b, 5.0, 0, cfg);
            INFO("phase " << i << " shift " << shift << ": " << best.mean << " vs " << alt.mean);
            CHECK(best.mean >= alt.mean - 3.0 * std::hypot(best.std_error, alt.std_error));
        }
    }
}

TEST_CASE("invalid simulation inputs", "[simulator]") {
    const RiskModel model = table_model(1);
    CHECK_THROWS_AS(estimate_value(model, std::vector<double>{1.0}, 0.0, 0, {}), Error);
    CHECK_THROWS_AS(estimate_value(model, std::vector<double>{1.0, -1.0}, 0.0, 0, {}), Error);
    CHECK_THROWS_AS(estimate_value(model, std::vector<double>{1.0, 1.0}, -1.0, 0, {}), Error);
    CHECK_THROWS_AS(estimate_value(model, std::vector<double>{1.0, 1.0}, 0.0, 2, {}), Error);
    CHECK_THROWS_AS(estimate_value(model, std::vector<double>{1.0, 1.0}, 0.0, 0, {.paths = 0}), Error);
    CHECK(horizon_for_bound(model, 5.0, 1e-5) == Approx(std::log(155.0 / 1e-5) / 0.1));
}
