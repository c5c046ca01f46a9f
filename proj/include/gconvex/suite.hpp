#pragma once

// Runs a Batch: every scenario and characterization case is an independent
// job; results come back in input order regardless of the job count.

#include <algorithm>
#include <atomic>
#include <string>
#include <thread>
#include <vector>

#include "gconvex/characterization.hpp"
#include "gconvex/jensen_lab.hpp"
#include "gconvex/mc_solver.hpp"
#include "gconvex/report.hpp"
#include "gconvex/scenario_io.hpp"

namespace gconvex {

struct CrossSolverEntry {
    std::string payoff;
    double pde = 0.0;
    McResult mc;
    double band = 0.0;
    bool agree() const { return std::fabs(pde - mc.y0) <= band; }
};

struct ScenarioOutcome {
    std::string id;
    std::optional<JensenReport> jensen;
    std::optional<CoherenceReport> coherence;
    std::optional<ViabilityReport> viability;
    std::optional<TransformReport> martingale;
    std::vector<CrossSolverEntry> cross;
    std::vector<std::string> failures;
    bool passed() const { return failures.empty(); }
};

struct CharacterizationOutcome {
    std::string id;
    bool predictor = false;
    std::vector<CharacterizationReport> tests;
    std::vector<std::pair<std::string, Decision>> catalog;  // convex h -> check_shape verdict
    std::vector<std::string> failures;
    bool passed() const { return failures.empty(); }
};

struct SuiteResult {
    std::vector<ScenarioOutcome> scenarios;
    std::vector<CharacterizationOutcome> characterizations;
    bool passed() const {
        return std::all_of(scenarios.begin(), scenarios.end(), [](const auto& s) { return s.passed(); }) &&
               std::all_of(characterizations.begin(), characterizations.end(), [](const auto& c) { return c.passed(); });
    }
};

inline bool wants(const BatchScenario& b, const char* check) {
    return std::find(b.checks.begin(), b.checks.end(), check) != b.checks.end();
}

/// PDE and MC on phi and h(phi).
inline std::vector<CrossSolverEntry> cross_solver(const Scenario& sc, const McConfig& mc) {
    std::vector<CrossSolverEntry> out;
    for (const auto& p : {sc.payoff, compose(sc.h, sc.payoff)}) {
        CrossSolverEntry e;
        e.payoff = p.label;
        PdeConfig cfg = sc.solver;
        e.pde = solve_pde(sc.gen, p, sc.T, cfg).y0;
        McConfig m = mc;
        m.x0 = cfg.x0;
        e.mc = solve_mc(sc.gen, p, sc.T, m);
        e.band = std::max(3.0 * e.mc.std_error, 2e-2);
        out.push_back(std::move(e));
    }
    return out;
}

inline ScenarioOutcome run_scenario(const BatchScenario& b, const McConfig& mc = McConfig{}) {
    const Scenario& sc = b.scenario;
    ScenarioOutcome o;
    o.id = sc.id;
    auto fail = [&](std::string msg) { o.failures.push_back(sc.id + ": " + std::move(msg)); };
    try {
        if (wants(b, "jensen") || wants(b, "viability")) {
            o.jensen = verify_jensen(sc);
            if (!sc.expect.empty() && (sc.expect == "holds") != o.jensen->holds)
                fail("expected Jensen to " + std::string(sc.expect == "holds" ? "hold" : "fail") + ", min gap " +
                     std::to_string(o.jensen->min_gap));
        }
        if (wants(b, "coherence")) {
            o.coherence = criterion_solver_coherence(sc);
            if (!o.coherence->coherent) fail("criterion and solver disagree");
        }
        if (wants(b, "viability")) {
            o.viability = viability_check(sc.gen, sc.h, sc.payoff, compose(sc.h, sc.payoff), sc.T, sc.solver, sc.tol);
            if (o.viability->viable != o.jensen->holds) fail("viability verdict differs from the Jensen verdict");
        }
        if (wants(b, "martingale")) {
            try {
                o.martingale = martingale_transform_suite(sc.gen, sc.h, {sc.payoff}, sc.T, sc.solver);
            } catch (const ContradictionDetected& e) {
                fail(e.what());
            }
        }
        if (wants(b, "cross_solver")) {
            o.cross = cross_solver(sc, mc);
            for (const auto& e : o.cross)
                if (!e.agree())
                    fail("PDE and MC disagree on " + e.payoff + ": " + std::to_string(e.pde) + " vs " +
                         std::to_string(e.mc.y0));
        }
    } catch (const Error& e) {
        fail(std::string(e.kind()) + ": " + e.what());
    }
    return o;
}

inline CharacterizationOutcome run_characterization(const CharacterizationCase& c) {
    CharacterizationOutcome o;
    o.id = c.id;
    try {
        o.predictor = jensen_all_convex_predictor(c.gen);
        if (c.predictor && *c.predictor != o.predictor)
            o.failures.push_back(c.id + ": predictor returned " + (o.predictor ? "true" : "false"));
        o.tests.push_back(super_homogeneity_test(c.gen));
        o.tests.push_back(self_financing_test(c.gen));
        o.tests.push_back(zero_interest_test(c.gen));
        o.tests.push_back(translation_invariance_test(c.gen));
        bool any_witness = false, all_convex = true;
        for (const auto& src : convex_function_catalog()) {
            auto v = check_shape(c.gen, ScalarFunction::symbolic(src), ShapeMode::convex);
            o.catalog.emplace_back(src, v.decision);
            all_convex = all_convex && v.decision == Decision::g_convex;
            any_witness = any_witness || v.witness.has_value();
        }
        if (o.predictor && !all_convex) o.failures.push_back(c.id + ": predictor true but a convex h is not g-convex");
        if (!o.predictor && !any_witness) o.failures.push_back(c.id + ": predictor false but no convex h has a witness");
    } catch (const Error& e) {
        o.failures.push_back(c.id + ": " + e.kind() + ": " + e.what());
    }
    return o;
}

/// Fans jobs out over `jobs` threads; each job writes only its own slot.
inline SuiteResult run_suite(const Batch& batch, unsigned jobs = 1, const McConfig& mc = McConfig{}) {
    SuiteResult r;
    r.scenarios.resize(batch.scenarios.size());
    r.characterizations.resize(batch.characterizations.size());
    const std::size_t ns = batch.scenarios.size(), total = ns + batch.characterizations.size();
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < total;) {
            if (k < ns) r.scenarios[k] = run_scenario(batch.scenarios[k], mc);
            else r.characterizations[k - ns] = run_characterization(batch.characterizations[k - ns]);
        }
    };
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(total, 1))));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < jobs; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return r;
}

inline json to_json(const ScenarioOutcome& o) {
    json j{{"id", o.id}, {"passed", o.passed()}};
    if (o.jensen) j["jensen"] = to_json(*o.jensen);
    if (o.coherence) j["coherence"] = to_json(*o.coherence);
    if (o.viability) j["viability"] = to_json(*o.viability);
    if (o.martingale) j["martingale"] = to_json(*o.martingale);
    if (!o.cross.empty()) {
        json c = json::array();
        for (const auto& e : o.cross)
            c.push_back({{"payoff", e.payoff}, {"pde", e.pde}, {"mc", to_json(e.mc)}, {"band", e.band},
                         {"agree", e.agree()}});
        j["cross_solver"] = c;
    }
    j["failures"] = o.failures;
    return j;
}

inline json to_json(const CharacterizationOutcome& o) {
    json tests = json::array(), cat = json::array();
    for (const auto& t : o.tests) tests.push_back(to_json(t));
    for (const auto& [h, d] : o.catalog) cat.push_back({{"h", h}, {"decision", to_string(d)}});
    return {{"id", o.id}, {"passed", o.passed()}, {"predictor", o.predictor}, {"tests", tests}, {"catalog", cat},
            {"failures", o.failures}};
}

inline json to_json(const SuiteResult& r) {
    json s = json::array(), c = json::array(), failures = json::array();
    for (const auto& o : r.scenarios) {
        s.push_back(to_json(o));
        for (const auto& f : o.failures) failures.push_back(f);
    }
    for (const auto& o : r.characterizations) {
        c.push_back(to_json(o));
        for (const auto& f : o.failures) failures.push_back(f);
    }
    return {{"passed", r.passed()}, {"scenarios", s}, {"characterizations", c}, {"failures", failures}};
}

} // namespace gconvex
