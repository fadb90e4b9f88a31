#include "test_support.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <sstream>

using namespace phasebar;
using Catch::Approx;

namespace {

Error parse_error(std::string_view text) {
    try {
        (void)io::parse_model_spec(text);
    } catch (const Error& e) {
        return e;
    }
    FAIL("spec was accepted: " << text);
    return Error(ErrorCode::InvalidArgument, "");
}

}  // namespace

TEST_CASE("well-formed spec parses", "[io]") {
    const auto spec = io::parse_model_spec(
        R"({"name": "x", "n": 2, "T": [[-10, 5], [4, -12]], "pi": [0.4, 0.6], "c": 15, "delta": 0.1, "beta": 1,
            "solver": {"h": 0.002, "x_max": 25}})");
    CHECK(spec.name == "x");
    CHECK(spec.model.premium_rate == 15.0);
    CHECK(spec.model.environment.exit()(1) == 8.0);
    const SolverConfig cfg = spec.solver_config();
    CHECK(cfg.h == 0.002);
    CHECK(cfg.x_max == 25.0);
    CHECK(cfg.tol == SolverConfig{}.tol);
}

TEST_CASE("spec errors name the offending field", "[io]") {
    const auto bad_pi = parse_error(R"({"T": [[-10, 5], [4, -12]], "pi": [0.6, 0.6], "c": 15, "delta": 0.1, "beta": 1})");
    CHECK(bad_pi.code() == ErrorCode::ParseError);
    CHECK(std::string(bad_pi.what()).find("`pi`") != std::string::npos);

    const auto bad_t = parse_error(R"({"T": [[-3, 5], [1, -6]], "pi": [0.5, 0.5], "c": 15, "delta": 0.1, "beta": 1})");
    CHECK(bad_t.code() == ErrorCode::ParseError);
    CHECK(std::string(bad_t.what()).find("`T`") != std::string::npos);

    const auto ragged = parse_error(R"({"T": [[-3, 1], [1]], "pi": [0.5, 0.5], "c": 15, "delta": 0.1, "beta": 1})");
    CHECK(std::string(ragged.what()).find("`T`") != std::string::npos);

    const auto missing = parse_error(R"({"T": [[-3]], "pi": [1], "delta": 0.1, "beta": 1})");
    CHECK(std::string(missing.what()).find("`c`") != std::string::npos);

    const auto count = parse_error(R"({"n": 3, "T": [[-3]], "pi": [1], "c": 1, "delta": 0.1, "beta": 1})");
    CHECK(std::string(count.what()).find("`n`") != std::string::npos);
}

TEST_CASE("syntax errors report a line", "[io]") {
    const auto e = parse_error("{\n  \"T\": [[-3]],\n  \"pi\": [1,,]\n}");
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
}

TEST_CASE("shipped spec files match the embedded tables", "[io]") {
    for (const auto& table : io::golden_tables()) {
        const auto file = io::load_model_spec(std::string(PHASEBAR_SPECS_DIR) + "/table" + std::to_string(table.id) + ".json");
        const auto embedded = io::parse_model_spec(table.spec);
        INFO("table " << table.id);
        CHECK(file.model.environment.subintensity() == embedded.model.environment.subintensity());
        CHECK(file.model.environment.restart() == embedded.model.environment.restart());
        CHECK(file.model.premium_rate == embedded.model.premium_rate);
        CHECK(file.model.discount_rate == embedded.model.discount_rate);
        CHECK(file.model.claim_size_rate == embedded.model.claim_size_rate);
        CHECK(table.barriers.size() == embedded.model.phases());
    }
    CHECK_THROWS_AS(io::golden_table(8), Error);
    CHECK_THROWS_AS(io::load_model_spec("/nonexistent/spec.json"), Error);
}

TEST_CASE("csv output round-trips exactly", "[io]") {
    const RiskModel model = phasebar::testing::table_model(1);
    const SolveResult r = solve(model, {.h = 0.05});
    std::stringstream buf;
    io::write_csv(buf, r);
    const auto table = io::read_csv(buf);
    CHECK(table.header == std::vector<std::string>{"x", "V1", "V2", "V3"});
    REQUIRE(table.rows.size() == r.grid().points());
    for (std::size_t k = 0; k < table.rows.size(); ++k) {
        REQUIRE(table.rows[k][0] == r.grid().x(k));
        REQUIRE(table.rows[k][1] == r.values[0][k]);
        REQUIRE(table.rows[k][2] == r.values[1][k]);
        REQUIRE(table.rows[k][3] == r.claim_value[k]);
    }

    std::stringstream bad("x,V1\n1,2,3\n");
    CHECK_THROWS_AS(io::read_csv(bad), Error);
}

TEST_CASE("structured output carries the schema version", "[io]") {
    const RiskModel model = phasebar::testing::table_model(2);
    const SolveResult r = solve(model, {.h = 0.05});
    const auto j = io::to_json(r);
    CHECK(j["schema_version"] == io::schema_version);
    CHECK(j["barriers"].size() == 2);

    const auto report = io::to_json(verify_all(model, r));
    CHECK(report["checks"].size() == 12);

    SimEstimate e{.mean = 1.5, .std_error = 0.1, .paths = 10};
    const auto sj = io::to_json(e);
    CHECK(sj["stderr"] == 0.1);
    CHECK(sj["paths"] == 10);
}

TEST_CASE("formatted doubles parse back exactly", "[io][property]") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1e3);
    for (int k = 0; k < 1000; ++k) {
        const double v = u(rng);
        REQUIRE(std::stod(io::format_double(v)) == v);
    }
}
