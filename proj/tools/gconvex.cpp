// gconvex: command-line front end.
//
// stdout carries exactly one JSON document (the summary). Data files go to
// --out in the --format of choice. Exit codes: 0 ok, 1 assertion or
// expectation failure, 2 input error.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gconvex/characterization.hpp"
#include "gconvex/convexity.hpp"
#include "gconvex/jensen_lab.hpp"
#include "gconvex/mc_solver.hpp"
#include "gconvex/pde_solver.hpp"
#include "gconvex/report.hpp"
#include "gconvex/scenario_io.hpp"
#include "gconvex/suite.hpp"

using namespace gconvex;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0, kFailed = 1, kInput = 2;

struct Common {
    std::string format = "json";
    std::string out;
    std::uint64_t seed = 42;
    bool seed_given = false;
};

/// --seed wins over GCONVEX_SEED, which wins over the default.
std::uint64_t effective_seed(const Common& c) {
    if (c.seed_given) return c.seed;
    if (const char* env = std::getenv("GCONVEX_SEED")) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(env, &used);
            if (used != std::string(env).size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw InputError("ConfigError", std::string("GCONVEX_SEED is not an unsigned integer: ") + env);
        }
    }
    return c.seed;
}

void print_summary(const json& j) { std::cout << round_numbers(j, 6).dump(2) << '\n'; }

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw InputError("IOError", "cannot write " + path);
    return os;
}

void write_json_file(const std::string& path, const json& j) {
    auto os = open_out(path);
    // nlohmann prints doubles with max_digits10 = 17 significant digits
    os << j.dump(2) << '\n';
}

void require_out_for_csv(const Common& c) {
    if (c.format == "csv" && c.out.empty()) throw InputError("ConfigError", "--format csv needs --out");
}

ScalarFunction load_h(const std::string& expr, const std::string& table) {
    if (!expr.empty() && !table.empty()) throw InputError("ConfigError", "give either --h or --h-table");
    if (!table.empty()) return load_table_csv(table);
    if (expr.empty()) throw InputError("ConfigError", "--h or --h-table is required");
    return ScalarFunction::symbolic(expr);
}

ShapeMode parse_mode(const std::string& m) {
    if (m == "convex") return ShapeMode::convex;
    if (m == "concave") return ShapeMode::concave;
    return ShapeMode::affine;
}

void add_common(CLI::App* app, Common& c) {
    app->add_option("--format", c.format, "file format for --out")->check(CLI::IsMember({"json", "csv"}));
    app->add_option("--out", c.out, "output file");
    app->add_option("--seed", c.seed, "MC seed (default 42, env GCONVEX_SEED)")
        ->each([&c](const std::string&) { c.seed_given = true; });
}

// ---- check ---------------------------------------------------------------

struct CheckArgs {
    Common common;
    std::string gen, h, h_table, mode = "convex", expect;
    int dim_z = 1;
    double T = 1.0;
    std::size_t ny = 201, nz = 51;
};

int cmd_check(const CheckArgs& a) {
    require_out_for_csv(a.common);
    auto gen = make_generator(a.gen, a.dim_z, a.T);
    auto h = load_h(a.h, a.h_table);
    Scan scan = Scan::defaults(a.T, a.dim_z);
    scan.y.count = a.ny;
    scan.z.count = a.nz;
    auto v = check_shape(gen, h, parse_mode(a.mode), scan);
    json j = to_json(v);
    if (!a.common.out.empty()) {
        if (a.common.format == "json") {
            write_json_file(a.common.out, j);
        } else {
            auto os = open_out(a.common.out);
            os << "decision,min_margin,max_margin,witness_t,witness_y,witness_z\n";
            os << to_string(v.decision) << ',' << format_sig(v.min_margin, 17) << ',' << format_sig(v.max_margin, 17);
            if (v.witness) {
                os << ',' << format_sig(v.witness->t, 17) << ',' << format_sig(v.witness->y, 17) << ',';
                for (std::size_t k = 0; k < v.witness->z.size(); ++k)
                    os << (k ? ";" : "") << format_sig(v.witness->z[k], 17);
            } else {
                os << ",,,";
            }
            os << '\n';
        }
    }
    int code = kOk;
    if (!a.expect.empty()) {
        j["expect"] = a.expect;
        j["expect_met"] = a.expect == to_string(v.decision);
        if (!j["expect_met"].get<bool>()) code = kFailed;
    }
    print_summary(j);
    return code;
}

// ---- solve ---------------------------------------------------------------

struct SolveArgs {
    Common common;
    std::string gen, payoff, method = "pde", basis = "hat";
    double T = 1.0, x0 = 0.0;
    std::size_t nx = 401, nt = 0, stride = 0;
    std::size_t paths = 10000, steps = 100, degree = 4, knots = 16;
};

int cmd_solve(const SolveArgs& a) {
    require_out_for_csv(a.common);
    auto gen = make_generator(a.gen, 1, a.T);
    auto payoff = PayoffSpec::from_expr(a.payoff);
    json j{{"gen", gen.source}, {"payoff", payoff.label}, {"T", a.T}, {"x0", a.x0}, {"method", a.method}};
    std::optional<SolveResult> pde;
    std::optional<McResult> mc;
    if (a.method != "mc") {
        PdeConfig cfg;
        cfg.nx = a.nx;
        cfg.nt = a.nt;
        cfg.x0 = a.x0;
        pde = solve_pde(gen, payoff, a.T, cfg);
        j["pde"] = {{"y0", pde->y0}, {"z0", pde->z_at(0, pde->space.count / 2)}, {"nx", pde->space.count},
                    {"nt", pde->time.count - 1}, {"diagnostics", to_json(pde->diagnostics)}};
    }
    if (a.method != "pde") {
        McConfig m;
        m.paths = a.paths;
        m.steps = a.steps;
        m.basis = a.basis == "hat" ? McBasis::hat : McBasis::monomial;
        m.basis_degree = a.degree;
        m.knots = a.knots;
        m.x0 = a.x0;
        m.seed = effective_seed(a.common);
        mc = solve_mc(gen, payoff, a.T, m);
        j["mc"] = to_json(*mc);
        j["mc"]["seed"] = m.seed;
    }
    int code = kOk;
    if (pde && mc) {
        const double delta = pde->y0 - mc->y0, band = std::max(3.0 * mc->std_error, 2e-2);
        j["cross_check"] = {{"delta", delta}, {"band", band}, {"agree", std::fabs(delta) <= band}};
        if (std::fabs(delta) > band) code = kFailed;
    }
    j["y0"] = pde ? pde->y0 : mc->y0;
    if (!a.common.out.empty()) {
        if (a.common.format == "csv") {
            if (!pde) throw InputError("ConfigError", "surface CSV needs --method pde or both");
            auto os = open_out(a.common.out);
            const std::size_t stride = a.stride ? a.stride : std::max<std::size_t>(1, (pde->time.count - 1 + 99) / 100);
            write_surface_csv(*pde, os, stride);
            j["surface"] = {{"path", a.common.out}, {"time_stride", stride}};
        } else {
            write_json_file(a.common.out, j);
        }
    }
    print_summary(j);
    return code;
}

// ---- suite ---------------------------------------------------------------

struct SuiteArgs {
    Common common;
    std::string batch;
    unsigned jobs = 1;
    bool cross_solver = false;
    std::string surfaces;
};

void write_gap_surface(const Scenario& sc, const fs::path& dir) {
    auto r = verify_jensen(sc, true);
    std::ofstream os(dir / (sc.id + ".csv"));
    if (!os) throw InputError("IOError", "cannot write into " + dir.string());
    os << "t,x,lhs,rhs,gap\n";
    const auto& ux = *r.u_x;
    const auto& uh = *r.u_hx;
    const std::size_t stride = std::max<std::size_t>(1, (ux.time.count - 1 + 99) / 100);
    for (std::size_t n = 0; n < ux.time.count; ++n) {
        if (n % stride != 0 && n + 1 != ux.time.count) continue;
        for (std::size_t k = 0; k < ux.space.count; ++k) {
            const double lhs = sc.h(ux.at(n, k)), rhs = uh.at(n, k);
            os << format_sig(ux.time[n], 17) << ',' << format_sig(ux.space[k], 17) << ',' << format_sig(lhs, 17) << ','
               << format_sig(rhs, 17) << ',' << format_sig(rhs - lhs, 17) << '\n';
        }
    }
}

int cmd_suite(const SuiteArgs& a) {
    require_out_for_csv(a.common);
    auto batch = load_batch(a.batch);
    if (batch.empty()) throw InputError("ScenarioError", "no scenarios in " + a.batch);
    if (a.cross_solver)
        for (auto& s : batch.scenarios)
            if (!wants(s, "cross_solver")) s.checks.push_back("cross_solver");
    McConfig mc;
    mc.seed = effective_seed(a.common);
    auto result = run_suite(batch, a.jobs, mc);
    const json full = to_json(result);

    json summary{{"passed", result.passed()}, {"scenarios", json::array()}, {"characterizations", json::array()}};
    for (const auto& o : result.scenarios) {
        json s{{"id", o.id}, {"passed", o.passed()}};
        if (o.jensen) {
            s["holds"] = o.jensen->holds;
            s["min_gap"] = o.jensen->min_gap;
        }
        if (o.viability) s["viable"] = o.viability->viable;
        if (o.martingale && !o.martingale->entries.empty()) s["class"] = to_string(o.martingale->entries[0].kind);
        summary["scenarios"].push_back(s);
    }
    for (const auto& o : result.characterizations)
        summary["characterizations"].push_back({{"id", o.id}, {"passed", o.passed()}, {"predictor", o.predictor}});
    summary["failures"] = full["failures"];

    if (!a.common.out.empty()) {
        if (a.common.format == "json") {
            write_json_file(a.common.out, full);
        } else {
            auto os = open_out(a.common.out);
            os << "id,passed,holds,min_gap,tol,viable,viability_margin,class\n";
            for (const auto& o : result.scenarios) {
                os << o.id << ',' << (o.passed() ? "true" : "false") << ',';
                if (o.jensen)
                    os << (o.jensen->holds ? "true" : "false") << ',' << format_sig(o.jensen->min_gap, 17) << ','
                       << format_sig(o.jensen->tol, 17);
                else
                    os << ",,";
                os << ',';
                if (o.viability)
                    os << (o.viability->viable ? "true" : "false") << ',' << format_sig(o.viability->min_margin, 17);
                else
                    os << ',';
                os << ',';
                if (o.martingale && !o.martingale->entries.empty()) os << to_string(o.martingale->entries[0].kind);
                os << '\n';
            }
        }
    }
    if (!a.surfaces.empty()) {
        fs::create_directories(a.surfaces);
        for (const auto& s : batch.scenarios) write_gap_surface(s.scenario, a.surfaces);
    }
    print_summary(summary);
    return result.passed() ? kOk : kFailed;
}

// ---- envelope ------------------------------------------------------------

struct EnvelopeArgs {
    Common common;
    std::string gen, phi;
    double lo = -5.0, hi = 5.0;
    std::size_t ny = 401;
};

int cmd_envelope(const EnvelopeArgs& a) {
    require_out_for_csv(a.common);
    auto gen = make_generator(a.gen);
    auto phi = ScalarFunction::symbolic(a.phi);
    const UniformGrid grid{a.lo, a.hi, a.ny};
    auto env = g_convex_envelope(gen, phi, grid);
    json j = to_json(env);
    j["gen"] = gen.source;
    j["phi"] = phi.describe();
    double gap = 0.0;
    if (env.valid)
        for (std::size_t k = 0; k < grid.count; ++k) gap = std::max(gap, phi(grid[k]) - env.values[k]);
    j["max_phi_minus_f"] = env.valid ? json(gap) : json(nullptr);
    if (!a.common.out.empty()) {
        if (a.common.format == "csv") {
            auto os = open_out(a.common.out);
            os << "y,phi,f\n";
            for (std::size_t k = 0; k < grid.count; ++k)
                os << format_sig(grid[k], 17) << ',' << format_sig(phi(grid[k]), 17) << ','
                   << format_sig(env.values[k], 17) << '\n';
        } else {
            json full = j;
            full["y"] = grid.nodes();
            full["f"] = env.values;
            write_json_file(a.common.out, full);
        }
    }
    print_summary(j);
    return kOk;
}

// ---- classify ------------------------------------------------------------

struct ClassifyArgs {
    Common common;
    std::string gen;
    int dim_z = 1;
    std::vector<double> periods;
};

int cmd_classify(const ClassifyArgs& a) {
    if (a.common.format == "csv") throw InputError("ConfigError", "classify only writes JSON");
    auto gen = make_generator(a.gen, a.dim_z);
    const Scan scan = Scan::defaults(1.0, a.dim_z);
    json j{{"generator", to_json(gen)}};
    json tests = json::array();
    tests.push_back(to_json(super_homogeneity_test(gen, default_lambda_grid(), scan)));
    tests.push_back(to_json(self_financing_test(gen, scan)));
    tests.push_back(to_json(zero_interest_test(gen, scan)));
    tests.push_back(to_json(translation_invariance_test(gen, scan)));
    for (double c : a.periods) tests.push_back(to_json(periodicity_test(gen, c, scan)));
    j["tests"] = tests;
    j["jensen_all_convex_predictor"] = jensen_all_convex_predictor(gen);
    if (!a.common.out.empty()) write_json_file(a.common.out, j);
    print_summary(j);
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"g-convexity checks, g-expectation solvers and Jensen experiments"};
    app.require_subcommand(1);

    CheckArgs ck;
    auto* check = app.add_subcommand("check", "pointwise criterion L_g h >= 0 (or <= 0) on a scan");
    check->set_help_flag("--help", "Print this help message and exit");  // -h would clash with --h
    check->add_option("--gen", ck.gen, "generator expression in t, y, z1..zd")->required();
    check->add_option("--h", ck.h, "h as an expression in y");
    check->add_option("--h-table", ck.h_table, "h as a CSV table of y,h rows");
    check->add_option("--mode", ck.mode)->check(CLI::IsMember({"convex", "concave", "affine"}));
    check->add_option("--expect", ck.expect)->check(CLI::IsMember({"g_convex", "g_concave", "g_affine", "neither"}));
    check->add_option("--dim-z", ck.dim_z)->check(CLI::Range(1, 2));
    check->add_option("--T", ck.T)->check(CLI::PositiveNumber);
    check->add_option("--ny", ck.ny)->check(CLI::Range(3, 100001));
    check->add_option("--nz", ck.nz)->check(CLI::Range(1, 10001));
    add_common(check, ck.common);

    SolveArgs sv;
    auto* solve = app.add_subcommand("solve", "g-expectation of a payoff phi(W_T)");
    solve->add_option("--gen", sv.gen)->required();
    solve->add_option("--payoff", sv.payoff, "payoff expression in x")->required();
    solve->add_option("--T", sv.T)->check(CLI::PositiveNumber);
    solve->add_option("--x0", sv.x0);
    solve->add_option("--method", sv.method)->check(CLI::IsMember({"pde", "mc", "both"}));
    solve->add_option("--nx", sv.nx)->check(CLI::Range(5, 1000001));
    solve->add_option("--nt", sv.nt, "time steps (0: from the stability relation)");
    solve->add_option("--time-stride", sv.stride, "write every n-th time level to the CSV (0: about 100 levels)");
    solve->add_option("--paths", sv.paths);
    solve->add_option("--steps", sv.steps);
    solve->add_option("--basis", sv.basis)->check(CLI::IsMember({"hat", "monomial"}));
    solve->add_option("--degree", sv.degree);
    solve->add_option("--knots", sv.knots);
    add_common(solve, sv.common);

    SuiteArgs su;
    auto* suite = app.add_subcommand("suite", "run a TOML batch of scenarios");
    suite->add_option("batch", su.batch, "batch file")->required();
    suite->add_option("--jobs", su.jobs)->check(CLI::Range(1u, 256u));
    suite->add_flag("--cross-solver", su.cross_solver, "add the PDE/MC cross-check to every scenario");
    suite->add_option("--surfaces", su.surfaces, "directory for per-scenario gap surface CSVs");
    add_common(suite, su.common);

    EnvelopeArgs ev;
    auto* envelope = app.add_subcommand("envelope", "g-convex envelope of phi");
    envelope->add_option("--gen", ev.gen)->required();
    envelope->add_option("--phi", ev.phi, "phi as an expression in y")->required();
    envelope->add_option("--lo", ev.lo);
    envelope->add_option("--hi", ev.hi);
    envelope->add_option("--ny", ev.ny)->check(CLI::Range(3, 100001));
    add_common(envelope, ev.common);

    ClassifyArgs cl;
    auto* classify = app.add_subcommand("classify", "generator flags and characterization tests");
    classify->add_option("--gen", cl.gen)->required();
    classify->add_option("--dim-z", cl.dim_z)->check(CLI::Range(1, 2));
    classify->add_option("--period", cl.periods, "constants c for the y-periodicity test");
    add_common(classify, cl.common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        print_summary({{"error", "UsageError"}, {"message", e.what()}});
        return kInput;
    }

    try {
        if (*check) return cmd_check(ck);
        if (*solve) return cmd_solve(sv);
        if (*suite) return cmd_suite(su);
        if (*envelope) return cmd_envelope(ev);
        if (*classify) return cmd_classify(cl);
    } catch (const InputError& e) {
        std::cerr << e.kind() << ": " << e.what() << '\n';
        print_summary(error_json(e));
        return kInput;
    } catch (const Error& e) {
        std::cerr << e.kind() << ": " << e.what() << '\n';
        print_summary(error_json(e));
        return kFailed;
    }
    return kInput;
}
