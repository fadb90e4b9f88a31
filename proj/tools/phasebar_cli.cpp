// Command-line front end: solve, verify, simulate, reproduce.
//
// Exit codes:
//   0  success (converged / all checks pass / all barriers within tolerance)
//   1  verification or reproduction failure
//   2  parse or usage error
//   3  solver did not converge (MaxItersExceeded, DomainTooSmall)
//   4  any other runtime error
//
// Phases are numbered from 1 on the command line and in all output.

#include "phasebar/phasebar.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace phasebar;

constexpr int exit_ok = 0;
constexpr int exit_check_failed = 1;
constexpr int exit_parse = 2;
constexpr int exit_no_convergence = 3;
constexpr int exit_other = 4;

unsigned thread_count() {
    if (const char* env = std::getenv("PHASEBAR_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return 1;
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

struct SolverFlags {
    std::optional<double> h;
    std::optional<double> x_max;
    std::optional<double> tol;

    void attach(CLI::App* app) {
        app->add_option("--h", h, "grid spacing");
        app->add_option("--xmax", x_max, "initial domain [0, xmax]");
        app->add_option("--tol", tol, "sup-norm stopping tolerance");
    }
    SolverConfig config(const io::ModelSpec& spec) const {
        SolverConfig cfg = spec.solver_config();
        if (h) cfg.h = *h;
        if (x_max) cfg.x_max = *x_max;
        if (tol) cfg.tol = *tol;
        return cfg;
    }
};

void print_solution(std::ostream& out, const io::ModelSpec& spec, const SolveResult& r) {
    out << "model: " << (spec.name.empty() ? "(unnamed)" : spec.name) << ", " << r.phases() << " phases, h = "
        << io::format_double(r.grid().h()) << ", x_max = " << io::format_double(r.grid().x_max()) << '\n';
    out << "optimal barriers:\n";
    for (std::size_t i = 0; i < r.phases(); ++i) {
        out << "  " << (i + 1) << ": " << fixed(r.barriers[i], 3) << "  (grid " << fixed(r.grid_barriers[i], 3)
            << ", V(0) = " << fixed(r.values[i][0], 6) << ")\n";
    }
    out << "iterations: " << r.iterations << "\nfinal sup diff: " << io::format_double(r.final_sup_diff) << '\n';
}

void apply_fault(SolveResult& r, const std::string& kind) {
    if (kind == "perturb") {
        const Grid& grid = r.grid();
        const std::size_t kb = grid.nearest(r.grid_barriers[0]);
        std::vector<double> v(r.values[0].values().begin(), r.values[0].values().end());
        v[kb / 2] += 0.1;
        r.values[0] = ValueFunction(grid, std::move(v), r.values[0].tail_anchor());
    } else if (kind == "zero") {
        for (auto& f : r.values) f = ValueFunction::zero(r.grid());
        r.claim_value = ValueFunction::zero(r.grid());
    } else {
        throw CLI::ValidationError("--fault", "expected perturb or zero");
    }
}

std::vector<double> parse_barrier_list(const std::string& text, std::size_t n) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            out.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw Error(ErrorCode::ParseError, "field `barriers`: bad number '" + cell + "'");
        }
    }
    if (out.size() != n) {
        throw Error(ErrorCode::ParseError, "field `barriers`: expected " + std::to_string(n) + " values");
    }
    return out;
}

int run_reproduce(const std::vector<int>& ids, const std::optional<double>& h, std::ostream& out) {
    bool all_ok = true;
    for (int id : ids) {
        const io::GoldenTable& table = io::golden_table(id);
        const io::ModelSpec spec = io::parse_model_spec(table.spec);
        SolverConfig cfg = spec.solver_config();
        if (h) cfg.h = *h;
        const SolveResult r = solve(spec.model, cfg);
        out << "table " << id << " (" << table.title << ")\n";
        out << "  phase  published  computed   diff\n";
        bool ok = true;
        for (std::size_t i = 0; i < r.phases(); ++i) {
            const double diff = r.barriers[i] - table.barriers[i];
            const bool within = std::abs(diff) <= io::golden_tolerance;
            ok = ok && within;
            out << "  " << (i + 1) << "      " << fixed(table.barriers[i], 3) << "     " << fixed(r.barriers[i], 4)
                << "   " << (diff >= 0 ? "+" : "") << fixed(diff, 4) << (within ? "" : "  <-- outside 0.02") << '\n';
        }
        out << "  " << (ok ? "PASS" : "FAIL") << '\n';
        all_ok = all_ok && ok;
    }
    return all_ok ? exit_ok : exit_check_failed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal phase-wise dividend barriers for phase-type interclaim times"};
    app.require_subcommand(1);
    // `--h` is the grid spacing, so help is long-form only.
    app.set_help_flag("--help", "print this help and exit");

    std::string format = "text";
    const auto add_format = [&](CLI::App* sub) {
        sub->add_option("--format", format, "text or structured (JSON)")->check(CLI::IsMember({"text", "structured"}));
    };

    // solve
    auto* solve_cmd = app.add_subcommand("solve", "compute optimal barriers and value functions");
    std::string solve_spec;
    std::string csv_path;
    SolverFlags solve_flags;
    solve_cmd->add_option("spec", solve_spec, "model file (JSON)")->required();
    solve_cmd->add_option("--csv", csv_path, "write x, V1..Vn, V{n+1} at grid resolution");
    solve_flags.attach(solve_cmd);
    add_format(solve_cmd);

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "solve, then certify the optimality conditions");
    std::string verify_spec;
    std::string fault;
    SolverFlags verify_flags;
    verify_cmd->add_option("spec", verify_spec, "model file (JSON)")->required();
    verify_cmd->add_option("--fault", fault, "test hook: corrupt the solution (perturb|zero) before checking");
    verify_flags.attach(verify_cmd);
    add_format(verify_cmd);

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo value of a phase-wise barrier strategy");
    std::string sim_spec;
    std::string barrier_text;
    double x0 = 0.0;
    std::size_t phase = 1;
    std::uint64_t paths = 100'000;
    std::uint64_t seed = SimConfig{}.seed;
    std::optional<double> horizon;
    bool compare_solver = false;
    bool antithetic = false;
    SolverFlags sim_flags;
    sim_cmd->add_option("spec", sim_spec, "model file (JSON)")->required();
    sim_cmd->add_option("--barriers", barrier_text, "comma-separated barriers; default: solver optimum");
    sim_cmd->add_option("--x0", x0, "initial surplus")->check(CLI::NonNegativeNumber);
    sim_cmd->add_option("--phase", phase, "initial phase (1-based)")->check(CLI::PositiveNumber);
    sim_cmd->add_option("--paths", paths, "number of paths")->check(CLI::PositiveNumber);
    sim_cmd->add_option("--seed", seed, "64-bit seed");
    sim_cmd->add_option("--horizon", horizon, "truncation time; default keeps the bound below 1e-5")
        ->check(CLI::PositiveNumber);
    sim_cmd->add_flag("--compare-solver", compare_solver, "also print the solver value and z-score");
    sim_cmd->add_flag("--antithetic", antithetic, "antithetic claim sizes");
    sim_flags.attach(sim_cmd);
    add_format(sim_cmd);

    // reproduce
    auto* repro_cmd = app.add_subcommand("reproduce", "compare against the published barrier tables");
    std::string table_arg;
    std::optional<double> repro_h;
    repro_cmd->add_option("table", table_arg, "table id 1..7 or 'all'")->required();
    repro_cmd->add_option("--h", repro_h, "grid spacing");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_parse;
    }

    try {
        if (solve_cmd->parsed()) {
            const io::ModelSpec spec = io::load_model_spec(solve_spec);
            const SolveResult r = solve(spec.model, solve_flags.config(spec));
            if (!csv_path.empty()) {
                std::ofstream csv(csv_path);
                if (!csv) throw Error(ErrorCode::InvalidArgument, "cannot write " + csv_path);
                io::write_csv(csv, r);
            }
            if (format == "structured") {
                std::cout << io::to_json(r).dump(2) << '\n';
            } else {
                print_solution(std::cout, spec, r);
            }
            return exit_ok;
        }

        if (verify_cmd->parsed()) {
            const io::ModelSpec spec = io::load_model_spec(verify_spec);
            SolveResult r = solve(spec.model, verify_flags.config(spec));
            if (!fault.empty()) apply_fault(r, fault);
            const VerificationReport report = verify_all(spec.model, r);
            if (format == "structured") {
                nlohmann::json j = io::to_json(report);
                j["solution"] = io::to_json(r);
                std::cout << j.dump(2) << '\n';
            } else {
                print_solution(std::cout, spec, r);
                io::write_text(std::cout, report);
            }
            return report.passed() ? exit_ok : exit_check_failed;
        }

        if (sim_cmd->parsed()) {
            const io::ModelSpec spec = io::load_model_spec(sim_spec);
            if (phase > spec.model.phases()) {
                throw Error(ErrorCode::ParseError, "field `phase`: must be in 1.." + std::to_string(spec.model.phases()));
            }
            std::optional<SolveResult> solved;
            std::vector<double> barriers;
            if (!barrier_text.empty()) {
                barriers = parse_barrier_list(barrier_text, spec.model.phases());
            }
            if (barrier_text.empty() || compare_solver) {
                solved = solve(spec.model, sim_flags.config(spec));
                if (barrier_text.empty()) barriers = solved->grid_barriers;
            }
            SimConfig cfg;
            cfg.paths = paths;
            cfg.seed = seed;
            cfg.horizon = horizon;
            cfg.antithetic = antithetic;
            cfg.threads = thread_count();
            const SimEstimate est = estimate_value(spec.model, barriers, x0, phase - 1, cfg);

            std::optional<double> solver_value;
            std::optional<double> z;
            if (compare_solver) {
                solver_value = solved->values[phase - 1].eval(x0);
                const double spread = est.std_error > 0.0 ? est.std_error : std::numeric_limits<double>::infinity();
                z = (est.mean - *solver_value) / spread;
            }
            if (format == "structured") {
                nlohmann::json j = io::to_json(est);
                j["barriers"] = barriers;
                j["x0"] = x0;
                j["phase"] = phase;
                if (solver_value) {
                    j["solver_value"] = *solver_value;
                    j["z"] = *z;
                }
                std::cout << j.dump(2) << '\n';
            } else {
                std::cout << "barriers:";
                for (double b : barriers) std::cout << ' ' << io::format_double(b);
                std::cout << "\nx0 = " << io::format_double(x0) << ", phase " << phase << ", " << est.paths
                          << " paths, seed " << est.seed << ", horizon " << io::format_double(est.horizon) << '\n';
                std::cout << "mean = " << io::format_double(est.mean) << " +/- " << io::format_double(est.std_error)
                          << "\ntruncation bound = " << io::format_double(est.truncation_bound) << '\n';
                if (solver_value) {
                    std::cout << "solver value = " << io::format_double(*solver_value) << "\nz = " << fixed(*z, 3)
                              << '\n';
                }
            }
            return exit_ok;
        }

        if (repro_cmd->parsed()) {
            std::vector<int> ids;
            if (table_arg == "all") {
                for (const auto& t : io::golden_tables()) ids.push_back(t.id);
            } else {
                try {
                    ids.push_back(std::stoi(table_arg));
                } catch (const std::exception&) {
                    throw Error(ErrorCode::ParseError, "field `table`: expected 1..7 or all");
                }
                if (ids.back() < 1 || ids.back() > 7) throw Error(ErrorCode::ParseError, "field `table`: expected 1..7 or all");
            }
            return run_reproduce(ids, repro_h, std::cout);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        switch (e.code()) {
            case ErrorCode::ParseError: return exit_parse;
            case ErrorCode::MaxItersExceeded:
            case ErrorCode::DomainTooSmall: return exit_no_convergence;
            default: return exit_other;
        }
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_parse;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_other;
    }
    return exit_other;
}
