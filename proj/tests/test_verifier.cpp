#include "test_support.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace phasebar;
using phasebar::testing::table_model;
using phasebar::testing::table_solution;
using Catch::Approx;

namespace {

/// Result with the given grid barriers and zero value functions, for checks
/// that only read barriers and model data.
SolveResult barriers_only(std::vector<double> barriers) {
    const Grid g = Grid::with_spacing(1e-3, 30.0);
    SolveResult r{.barriers = barriers,
                  .grid_barriers = barriers,
                  .values = std::vector<ValueFunction>(barriers.size(), ValueFunction::zero(g)),
                  .claim_value = ValueFunction::zero(g)};
    return r;
}

SolveResult with_values(const SolveResult& base, std::size_t phase, std::vector<double> values) {
    SolveResult out = base;
    out.values[phase] = ValueFunction(base.grid(), std::move(values), base.grid_barriers[phase]);
    return out;
}

const CheckRecord& record(const VerificationReport& report, std::string_view name) {
    const CheckRecord* c = report.find(name);
    REQUIRE(c != nullptr);
    return *c;
}

}  // namespace

TEST_CASE("converged two-phase solution passes every check", "[verifier]") {
    const auto report = verify_all(table_model(1), table_solution(1));
    for (const auto& c : report.checks) {
        INFO(c.name << ": measured " << c.measured << " tol " << c.tolerance << " " << c.detail);
        CHECK(c.passed());
    }
    CHECK(report.checks.size() == 12);
    CHECK(record(report, "concavity_2order").status == CheckStatus::Pass);
    CHECK(record(report, "time_ordering").status == CheckStatus::Pass);
    CHECK(record(report, "barrier_curvature").measured <= 1e-3);
    // 1 + delta / t_2 with t_2 = 8
    const auto& exit = record(report, "exit_slope_identity");
    CHECK(exit.phase == std::optional<std::size_t>(1));
    CHECK(exit.detail.find("1.0125") != std::string::npos);
}

TEST_CASE("equal barriers make the two-phase structural checks vacuous", "[verifier]") {
    const auto report = verify_all(table_model(2), table_solution(2));
    CHECK(report.passed());
    CHECK(record(report, "concavity_2order").status == CheckStatus::Skipped);
    CHECK(record(report, "time_ordering").status == CheckStatus::Pass);
    CHECK(record(report, "time_ordering").detail.find("vacuous") != std::string::npos);
}

TEST_CASE("ordering check on published barrier sets", "[verifier]") {
    // Exit rates (2, 4, 1, 0): phase 2 has the largest and the highest barrier.
    const auto t5 = barriers_only({8.907, 9.554, 8.274, 7.106});
    const auto ok5 = check_ordering(table_model(5), t5);
    CHECK(ok5.status == CheckStatus::Pass);
    CHECK(ok5.detail.find("{2}") != std::string::npos);

    // Exit rates (5, 1, 2, 5): phases 1 and 4 share the highest barrier.
    const auto t6 = barriers_only({10.109, 8.805, 9.205, 10.109});
    const auto ok6 = check_ordering(table_model(6), t6);
    CHECK(ok6.status == CheckStatus::Pass);
    CHECK(ok6.detail.find("{1,4}") != std::string::npos);

    const auto wrong = barriers_only({8.907, 9.554, 9.9, 7.106});
    CHECK(check_ordering(table_model(5), wrong).status == CheckStatus::Fail);

    const auto swapped = barriers_only({12.219, 11.779});
    CHECK(check_ordering(table_model(1), swapped).status == CheckStatus::Fail);
    CHECK(check_time_ordering(table_model(1), swapped).status == CheckStatus::Fail);
}

TEST_CASE("two-phase-only checks are skipped for larger models", "[verifier]") {
    const auto r = barriers_only({9.623, 10.264, 9.28});
    CHECK(check_concavity_2order(table_model(3), r).status == CheckStatus::Skipped);
    CHECK(check_time_ordering(table_model(3), r).status == CheckStatus::Skipped);
}

TEST_CASE("exit slope identity is skipped when the top phase never exits", "[verifier]") {
    const auto env = PhaseTypeModel::validate(phasebar::testing::matrix({{-3, 1}, {2, -2}}),
                                              phasebar::testing::vector({0.5, 0.5}));
    const auto model = RiskModel::make(10.0, 0.1, 1.0, env);
    const auto r = barriers_only({3.0, 5.0});
    const auto c = check_exit_slope_identity(model, r);
    CHECK(c.status == CheckStatus::Skipped);
    CHECK(c.detail.find("SkippedZeroIntensity") != std::string::npos);
}

TEST_CASE("injected faults are detected", "[verifier]") {
    const RiskModel model = table_model(1);
    const SolveResult& good = table_solution(1);

    const std::size_t kb = good.grid().nearest(good.grid_barriers[0]);
    std::vector<double> bumped(good.values[0].values().begin(), good.values[0].values().end());
    bumped[kb / 2] += 0.1;
    const auto perturbed = verify_all(model, with_values(good, 0, bumped));
    CHECK_FALSE(perturbed.passed());
    CHECK_FALSE(record(perturbed, "hjb_below_barrier").passed());

    SolveResult zero = good;
    for (std::size_t i = 0; i < zero.phases(); ++i) {
        zero.values[i] = ValueFunction(good.grid(), std::vector<double>(good.grid().points(), 0.0),
                                       good.grid_barriers[i]);
    }
    zero.claim_value = ValueFunction::zero(good.grid());
    const auto zeroed = verify_all(model, zero);
    CHECK_FALSE(zeroed.passed());
    CHECK_FALSE(record(zeroed, "smooth_fit").passed());
}

TEST_CASE("reports are deterministic", "[verifier]") {
    const auto a = verify_all(table_model(1), table_solution(1));
    const auto b = verify_all(table_model(1), table_solution(1));
    REQUIRE(a.checks.size() == b.checks.size());
    for (std::size_t k = 0; k < a.checks.size(); ++k) {
        CHECK(a.checks[k].name == b.checks[k].name);
        CHECK(a.checks[k].measured == b.checks[k].measured);
        CHECK(a.checks[k].status == b.checks[k].status);
    }
}

TEST_CASE("four-phase solution passes and ties the top barriers", "[verifier]") {
    const auto report = verify_all(table_model(6), table_solution(6));
    for (const auto& c : report.checks) {
        INFO(c.name << ": measured " << c.measured << " " << c.detail);
        CHECK(c.passed());
    }
    CHECK(record(report, "ordering").detail.find("{1,4}") != std::string::npos);
    CHECK(record(report, "exit_slope_identity").detail.find("1.020000") != std::string::npos);
}
