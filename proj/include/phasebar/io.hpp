#pragma once

#include "phasebar/error.hpp"
#include "phasebar/simulator.hpp"
#include "phasebar/solver.hpp"
#include "phasebar/verifier.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace phasebar::io {

inline constexpr int schema_version = 1;

/// Parsed model file. Solver fields are optional overrides of SolverConfig.
struct ModelSpec {
    std::string name;
    RiskModel model;
    std::optional<double> h;
    std::optional<double> x_max;
    std::optional<double> tol;

    [[nodiscard]] SolverConfig solver_config(SolverConfig base = {}) const {
        if (h) base.h = *h;
        if (x_max) base.x_max = *x_max;
        if (tol) base.tol = *tol;
        return base;
    }
};

namespace detail {

[[noreturn]] inline void field_error(std::string_view field, const std::string& what) {
    throw Error(ErrorCode::ParseError, "field `" + std::string(field) + "`: " + what);
}

inline double number_field(const nlohmann::json& obj, std::string_view field) {
    const auto it = obj.find(field);
    if (it == obj.end()) field_error(field, "missing");
    if (!it->is_number()) field_error(field, "expected a number");
    return it->get<double>();
}

inline std::optional<double> optional_number(const nlohmann::json& obj, std::string_view field,
                                             std::string_view label) {
    const auto it = obj.find(field);
    if (it == obj.end()) return std::nullopt;
    if (!it->is_number()) field_error(label, "expected a number");
    return it->get<double>();
}

inline std::string_view field_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::RestartNotProbability: return "pi";
        case ErrorCode::NegativeOffDiagonal:
        case ErrorCode::PositiveDiagonal:
        case ErrorCode::NegativeExitRate:
        case ErrorCode::SingularSubintensity: return "T";
        default: return "model";
    }
}

inline std::size_t line_of(std::string_view text, std::size_t byte) {
    std::size_t line = 1;
    for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
        if (text[k] == '\n') ++line;
    }
    return line;
}

}  // namespace detail

/// Reads one JSON object:
///   {"n": 2, "T": [[-10, 5], [4, -12]], "pi": [0.4, 0.6],
///    "c": 15, "delta": 0.1, "beta": 1, "solver": {"h": 0.001, "x_max": 30, "tol": 1e-8}}
/// Failures are ParseError with the offending field (or line) in the message.
inline ModelSpec parse_model_spec(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::ParseError,
                    "line " + std::to_string(detail::line_of(text, e.byte)) + ": " + std::string(e.what()));
    }
    if (!doc.is_object()) throw Error(ErrorCode::ParseError, "line 1: top level must be an object");

    const auto t_it = doc.find("T");
    if (t_it == doc.end() || !t_it->is_array() || t_it->empty()) detail::field_error("T", "expected a non-empty array of rows");
    const std::size_t n = t_it->size();
    if (const auto n_it = doc.find("n"); n_it != doc.end()) {
        if (!n_it->is_number_integer() || n_it->get<long long>() != static_cast<long long>(n)) {
            detail::field_error("n", "must be an integer equal to the number of rows of T");
        }
    }
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = (*t_it)[i];
        if (!row.is_array() || row.size() != n) {
            detail::field_error("T", "row " + std::to_string(i + 1) + " must have " + std::to_string(n) + " entries");
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (!row[j].is_number()) detail::field_error("T", "entry (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ") is not a number");
            sub(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j].get<double>();
        }
    }
    const auto pi_it = doc.find("pi");
    if (pi_it == doc.end() || !pi_it->is_array()) detail::field_error("pi", "expected an array");
    if (pi_it->size() != n) detail::field_error("pi", "expected " + std::to_string(n) + " entries");
    Eigen::VectorXd pi(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (!(*pi_it)[i].is_number()) detail::field_error("pi", "entry " + std::to_string(i + 1) + " is not a number");
        pi(static_cast<Eigen::Index>(i)) = (*pi_it)[i].get<double>();
    }

    const double c = detail::number_field(doc, "c");
    const double delta = detail::number_field(doc, "delta");
    const double beta = detail::number_field(doc, "beta");

    std::optional<PhaseTypeModel> env;
    try {
        env = PhaseTypeModel::validate(sub, pi);
    } catch (const Error& e) {
        detail::field_error(detail::field_for(e.code()), e.what());
    }
    if (!(c > 0.0)) detail::field_error("c", "must be positive");
    if (!(delta > 0.0)) detail::field_error("delta", "must be positive");
    if (!(beta > 0.0)) detail::field_error("beta", "must be positive");

    ModelSpec spec{.name = doc.value("name", std::string{}),
                   .model = RiskModel::make(c, delta, beta, std::move(*env)),
                   .h = std::nullopt,
                   .x_max = std::nullopt,
                   .tol = std::nullopt};
    if (const auto s = doc.find("solver"); s != doc.end()) {
        if (!s->is_object()) detail::field_error("solver", "expected an object");
        spec.h = detail::optional_number(*s, "h", "solver.h");
        spec.x_max = detail::optional_number(*s, "x_max", "solver.x_max");
        spec.tol = detail::optional_number(*s, "tol", "solver.tol");
        if (spec.h && !(*spec.h > 0.0)) detail::field_error("solver.h", "must be positive");
        if (spec.x_max && !(*spec.x_max > 0.0)) detail::field_error("solver.x_max", "must be positive");
        if (spec.tol && !(*spec.tol > 0.0)) detail::field_error("solver.tol", "must be positive");
    }
    return spec;
}

inline ModelSpec load_model_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model_spec(buf.str());
}

struct GoldenTable {
    int id;
    std::string_view title;
    std::string_view spec;
    std::vector<double> barriers;
};

inline constexpr double golden_tolerance = 0.02;

/// Inputs and published barriers of the seven worked examples.
inline const std::vector<GoldenTable>& golden_tables() {
    static const std::vector<GoldenTable> tables{
        {1, "2 phases, lambda_23 > lambda_13",
         R"({"name": "table1", "n": 2, "T": [[-10, 5], [4, -12]], "pi": [0.4, 0.6], "c": 15, "delta": 0.1, "beta": 1})",
         {11.779, 12.219}},
        {2, "2 phases, equal claim intensities",
         R"({"name": "table2", "n": 2, "T": [[-8, 3], [1, -6]], "pi": [0.4, 0.6], "c": 15, "delta": 0.1, "beta": 1})",
         {10.738, 10.738}},
        {3, "3 phases, pi = (0.2, 0.3, 0.5)",
         R"({"name": "table3", "n": 3, "T": [[-10, 5, 2], [2, -12, 4], [2, 4, -8]], "pi": [0.2, 0.3, 0.5], "c": 21.4, "delta": 0.1, "beta": 1})",
         {9.61, 10.26, 9.27}},
        {4, "3 phases, pi = (0.1, 0.1, 0.8)",
         R"({"name": "table4", "n": 3, "T": [[-10, 5, 2], [2, -12, 4], [2, 4, -8]], "pi": [0.1, 0.1, 0.8], "c": 21.4, "delta": 0.1, "beta": 1})",
         {9.39, 10.03, 9.05}},
        {5, "4 phases, distinct claim intensities",
         R"({"name": "table5", "n": 4, "T": [[-10, 5, 2, 1], [3, -14, 4, 3], [2, 2, -12, 7], [2, 3, 1, -6]], "pi": [0.5, 0.2, 0.2, 0.1], "c": 25, "delta": 0.1, "beta": 1})",
         {8.907, 9.554, 8.274, 7.106}},
        {6, "4 phases, two tied highest intensities",
         R"({"name": "table6", "n": 4, "T": [[-16, 7, 3, 1], [4, -8, 1, 2], [0, 1, -4, 1], [0, 0, 0, -5]], "pi": [0.5, 0.2, 0.2, 0.1], "c": 25, "delta": 0.1, "beta": 1})",
         {10.109, 8.805, 9.205, 10.109}},
        {7, "4 phases, all claim intensities equal",
         R"({"name": "table7", "n": 4, "T": [[-16, 7, 3, 1], [4, -12, 1, 2], [0, 1, -7, 1], [1, 1, 3, -10]], "pi": [0.5, 0.2, 0.2, 0.1], "c": 21, "delta": 0.1, "beta": 1})",
         {10.611, 10.611, 10.611, 10.611}},
    };
    return tables;
}

inline const GoldenTable& golden_table(int id) {
    for (const auto& t : golden_tables()) {
        if (t.id == id) return t;
    }
    throw Error(ErrorCode::InvalidArgument, "no table " + std::to_string(id) + " (expected 1..7)");
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

/// Columns x, V1..Vn, V{n+1} at every grid point.
inline void write_csv(std::ostream& out, const SolveResult& r) {
    const std::size_t n = r.phases();
    out << "x";
    for (std::size_t i = 0; i <= n; ++i) out << ",V" << (i + 1);
    out << '\n';
    const Grid& grid = r.grid();
    for (std::size_t k = 0; k < grid.points(); ++k) {
        out << format_double(grid.x(k));
        for (std::size_t i = 0; i < n; ++i) out << ',' << format_double(r.values[i][k]);
        out << ',' << format_double(r.claim_value[k]) << '\n';
    }
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(std::istream& in) {
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty csv");
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) table.header.push_back(cell);
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> row;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (p <= end) {
            const char* comma = std::find(p, end, ',');
            double v = 0.0;
            const auto res = std::from_chars(p, comma, v);
            if (res.ec != std::errc{} || res.ptr != comma) {
                throw Error(ErrorCode::ParseError, "csv line " + std::to_string(line_no) + ": bad number");
            }
            row.push_back(v);
            if (comma == end) break;
            p = comma + 1;
        }
        if (row.size() != table.header.size()) {
            throw Error(ErrorCode::ParseError, "csv line " + std::to_string(line_no) + ": wrong column count");
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

inline nlohmann::json to_json(const SolveResult& r) {
    nlohmann::json j;
    j["schema_version"] = schema_version;
    j["barriers"] = r.barriers;
    j["grid_barriers"] = r.grid_barriers;
    std::vector<double> at_zero;
    for (const auto& v : r.values) at_zero.push_back(v[0]);
    j["value_at_zero"] = at_zero;
    j["iterations"] = r.iterations;
    j["final_sup_diff"] = r.final_sup_diff;
    j["min_increment"] = r.min_increment;
    j["h"] = r.grid().h();
    j["x_max"] = r.grid().x_max();
    j["regrowths"] = r.regrowths;
    return j;
}

inline nlohmann::json to_json(const VerificationReport& report) {
    nlohmann::json j;
    j["schema_version"] = schema_version;
    j["status"] = report.passed() ? "PASS" : "FAIL";
    j["checks"] = nlohmann::json::array();
    for (const auto& c : report.checks) {
        nlohmann::json e;
        e["name"] = c.name;
        e["status"] = std::string(to_string(c.status));
        e["measured"] = std::isfinite(c.measured) ? nlohmann::json(c.measured) : nlohmann::json(nullptr);
        e["tolerance"] = c.tolerance;
        e["phase"] = c.phase ? nlohmann::json(*c.phase + 1) : nlohmann::json(nullptr);
        e["x"] = c.x ? nlohmann::json(*c.x) : nlohmann::json(nullptr);
        e["detail"] = c.detail;
        j["checks"].push_back(std::move(e));
    }
    return j;
}

inline nlohmann::json to_json(const SimEstimate& e) {
    nlohmann::json j;
    j["schema_version"] = schema_version;
    j["mean"] = e.mean;
    j["stderr"] = e.std_error;
    j["paths"] = e.paths;
    j["truncation_bound"] = e.truncation_bound;
    j["seed"] = e.seed;
    j["horizon"] = e.horizon;
    return j;
}

inline void write_text(std::ostream& out, const VerificationReport& report) {
    for (const auto& c : report.checks) {
        out << to_string(c.status) << "  " << c.name;
        if (c.status != CheckStatus::Skipped) {
            out << "  measured=" << format_double(c.measured) << " tol=" << format_double(c.tolerance);
        }
        if (c.phase) out << " phase=" << (*c.phase + 1);
        if (c.x) out << " x=" << format_double(*c.x);
        if (!c.detail.empty()) out << "  (" << c.detail << ")";
        out << '\n';
    }
    out << "overall: " << (report.passed() ? "PASS" : "FAIL") << '\n';
}

}  // namespace phasebar::io
