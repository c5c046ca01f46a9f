#pragma once

// End-to-end checks that tie the pointwise criterion to the solvers:
// Jensen's inequality for g-expectations, g-martingale transforms, epigraph
// viability, the axioms (A1)-(A4') and stability under pointwise limits.
//
// All solver comparisons are restricted to the window x0 +- 3 sqrt(T) where
// the boundary closure has no measurable influence.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gconvex/convexity.hpp"
#include "gconvex/driver.hpp"
#include "gconvex/errors.hpp"
#include "gconvex/mc_solver.hpp"
#include "gconvex/pde_solver.hpp"
#include "gconvex/scalar_function.hpp"

namespace gconvex {

struct Scenario {
    std::string id;
    GeneratorSpec gen;
    PayoffSpec payoff;
    ScalarFunction h;
    double T = 1.0;
    std::vector<double> eval_times{0.0};
    PdeConfig solver;
    std::optional<double> tol;  // overrides the solver tolerance
    std::string expect;         // "holds", "fails" or empty
};

/// max(5e-3, 10 dx^2): dominated by spatial error on the default grids.
inline double solver_tolerance(const SpaceGrid& g) { return std::max(5e-3, 10.0 * g.step() * g.step()); }

struct Window {
    std::size_t first = 0, last = 0;  // inclusive node range
};

inline Window interior_window(const SpaceGrid& g, double x0, double T) {
    const double w = 3.0 * std::sqrt(T);
    Window out;
    out.first = g.count;
    for (std::size_t j = 0; j < g.count; ++j) {
        if (std::fabs(g[j] - x0) > w + 1e-12) continue;
        out.first = std::min(out.first, j);
        out.last = j;
    }
    if (out.first == g.count) throw DomainTooSmall("no grid node inside the evaluation window");
    return out;
}

struct GapPoint {
    double t = 0.0, x = 0.0;
    double lhs = 0.0, rhs = 0.0, gap = 0.0;
};

struct JensenReport {
    std::string id;
    bool holds = false;
    double min_gap = 0.0;
    GapPoint worst;
    std::vector<GapPoint> at_eval;  // (t, x0) for each eval time
    double tol = 0.0;
    double window_lo = 0.0, window_hi = 0.0;
    std::size_t points = 0;
    std::shared_ptr<const SolveResult> u_x, u_hx;  // kept on request
};

/// Solves with terminal phi and h(phi), then compares h(u_X) with u_{h(X)}
/// at every time level and window node.
inline JensenReport verify_jensen(const Scenario& sc, bool keep_surfaces = false) {
    PdeConfig cfg = sc.solver;
    auto ux = std::make_shared<SolveResult>(solve_pde(sc.gen, sc.payoff, sc.T, cfg));
    auto uhx = std::make_shared<SolveResult>(solve_pde(sc.gen, compose(sc.h, sc.payoff), sc.T, cfg));

    JensenReport r;
    r.id = sc.id;
    r.tol = sc.tol.value_or(solver_tolerance(ux->space));
    const auto win = interior_window(ux->space, cfg.x0, sc.T);
    r.window_lo = ux->space[win.first];
    r.window_hi = ux->space[win.last];
    r.min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < ux->time.count; ++n)
        for (std::size_t j = win.first; j <= win.last; ++j) {
            const double lhs = sc.h(ux->at(n, j)), rhs = uhx->at(n, j);
            const double gap = rhs - lhs;
            ++r.points;
            if (gap < r.min_gap) {
                r.min_gap = gap;
                r.worst = GapPoint{ux->time[n], ux->space[j], lhs, rhs, gap};
            }
        }
    for (double t : sc.eval_times) {
        const double lhs = sc.h(ux->value(t, cfg.x0)), rhs = uhx->value(t, cfg.x0);
        r.at_eval.push_back(GapPoint{t, cfg.x0, lhs, rhs, rhs - lhs});
    }
    r.holds = r.min_gap >= -r.tol;
    if (keep_surfaces) {
        r.u_x = std::move(ux);
        r.u_hx = std::move(uhx);
    }
    return r;
}

/// Localized scenario at a "neither" witness: payoff y* + z* x on a short
/// horizon, so the solution stays near the violating point.
inline Scenario witness_scenario(const GeneratorSpec& gen, const ScalarFunction& h, const ScanPoint& w,
                                 double T = 0.1, const Scan& scan = Scan{}) {
    if (gen.dim_z != 1) throw PreconditionFailed("witness scenarios need d = 1");
    // y-only witnesses (curvature, second difference) have no z; use the
    // largest scanned |z|, where the curvature term dominates
    const double zs = w.z.empty() ? scan.z.hi : w.z[0];
    const double ys = w.y;
    Scenario sc;
    sc.id = "witness";
    sc.gen = gen;
    sc.payoff = PayoffSpec{[ys, zs](double x) { return ys + zs * x; },
                           expr::detail::format_number(ys) + " + " + expr::detail::format_number(zs) + " * x",
                           {}};
    sc.h = h;
    sc.T = T;
    return sc;
}

enum class ProcessClass { g_martingale, g_submartingale, g_supermartingale, none };

inline const char* to_string(ProcessClass c) {
    switch (c) {
    case ProcessClass::g_martingale: return "g_martingale";
    case ProcessClass::g_submartingale: return "g_submartingale";
    case ProcessClass::g_supermartingale: return "g_supermartingale";
    default: return "none";
    }
}

struct ProcessReport {
    ProcessClass kind = ProcessClass::none;
    double min_discrepancy = 0.0;  // min of E^g_{s,t}[u(t)] - u(s)
    double max_discrepancy = 0.0;
    double at_s = 0.0, at_x = 0.0;  // location of the larger |discrepancy|
    double tol = 0.0;
};

/// Classifies u(t, W_t) by re-solving between consecutive `times` with
/// terminal data u(t,.) and comparing with u(s,.) on the window.
inline ProcessReport classify_process(const GeneratorSpec& gen, const SolveResult& u, std::vector<double> times,
                                      std::optional<double> tol = std::nullopt, const PdeConfig& cfg = PdeConfig{}) {
    if (times.size() < 2) throw PreconditionFailed("need at least two times");
    std::sort(times.begin(), times.end());
    const double T = u.time.hi - u.time.lo;
    ProcessReport r;
    r.tol = tol.value_or(solver_tolerance(u.space));
    const auto win = interior_window(u.space, u.x0, T);
    r.min_discrepancy = std::numeric_limits<double>::infinity();
    r.max_discrepancy = -r.min_discrepancy;
    double worst_abs = -1.0;

    std::vector<double> row(u.space.count);
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        const double s = times[k], t = times[k + 1];
        for (std::size_t j = 0; j < u.space.count; ++j) row[j] = u.value(t, u.space[j]);
        auto sub = solve_from_values(gen, u.space, row, s, t, time_steps_for(t - s, u.space.step(), cfg),
                                     cfg.boundary);
        for (std::size_t j = win.first; j <= win.last; ++j) {
            const double d = sub.at(0, j) - u.value(s, u.space[j]);
            r.min_discrepancy = std::min(r.min_discrepancy, d);
            r.max_discrepancy = std::max(r.max_discrepancy, d);
            if (std::fabs(d) > worst_abs) {
                worst_abs = std::fabs(d);
                r.at_s = s;
                r.at_x = u.space[j];
            }
        }
    }
    const bool up = r.max_discrepancy > r.tol, down = r.min_discrepancy < -r.tol;
    if (up && down)
        throw InconclusiveClassification("discrepancies of both signs beyond tolerance (min " +
                                         std::to_string(r.min_discrepancy) + ", max " +
                                         std::to_string(r.max_discrepancy) + ")");
    r.kind = up ? ProcessClass::g_submartingale : down ? ProcessClass::g_supermartingale : ProcessClass::g_martingale;
    return r;
}

/// Surface of h(u) on the grid of u.
inline SolveResult transform_surface(const SolveResult& u, const ScalarFunction& h) {
    SolveResult out = u;
    for (double& v : out.surface) v = h(v);
    out.y0 = h(u.y0);
    return out;
}

inline std::vector<double> default_process_times(double T) { return {0.0, 0.25 * T, 0.5 * T, 0.75 * T, T}; }

struct TransformEntry {
    std::string payoff;
    ProcessClass kind = ProcessClass::none;
    double min_discrepancy = 0.0, max_discrepancy = 0.0;
};

struct TransformReport {
    Decision convex_decision = Decision::neither;
    Decision concave_decision = Decision::neither;
    std::string expected;  // class implied by the verdicts, or "not_submartingale"
    std::vector<TransformEntry> entries;
    bool consistent = true;
    bool inverse_evidence = false;  // a "neither" h produced a non-submartingale
    std::string level = "evidence";
};

/// h(Y) for Y = E^g[phi] over a battery of phi: g-convex h must give
/// g-submartingales, g-concave h g-supermartingales, g-affine h martingales.
inline TransformReport martingale_transform_suite(const GeneratorSpec& gen, const ScalarFunction& h,
                                                  const std::vector<PayoffSpec>& base_payoffs, double T = 1.0,
                                                  const PdeConfig& cfg = PdeConfig{}) {
    TransformReport r;
    r.convex_decision = check_shape(gen, h, ShapeMode::convex).decision;
    r.concave_decision = check_shape(gen, h, ShapeMode::concave).decision;
    const bool cvx = r.convex_decision != Decision::neither, ccv = r.concave_decision != Decision::neither;
    r.expected = cvx && ccv ? "g_martingale" : cvx ? "g_submartingale" : ccv ? "g_supermartingale" : "not_submartingale";

    for (const auto& p : base_payoffs) {
        auto y = solve_pde(gen, p, T, cfg);
        TransformEntry e;
        e.payoff = p.label;
        try {
            auto c = classify_process(gen, transform_surface(y, h), default_process_times(T), std::nullopt, cfg);
            e.kind = c.kind;
            e.min_discrepancy = c.min_discrepancy;
            e.max_discrepancy = c.max_discrepancy;
        } catch (const InconclusiveClassification&) {
            e.kind = ProcessClass::none;
        }
        const bool sub_like = e.kind == ProcessClass::g_martingale || e.kind == ProcessClass::g_submartingale;
        const bool super_like = e.kind == ProcessClass::g_martingale || e.kind == ProcessClass::g_supermartingale;
        if (cvx && ccv && e.kind != ProcessClass::g_martingale) r.consistent = false;
        else if (cvx && !sub_like) r.consistent = false;
        else if (ccv && !super_like) r.consistent = false;
        if (!cvx && !sub_like) r.inverse_evidence = true;
        r.entries.push_back(std::move(e));
    }
    if (!r.consistent)
        throw ContradictionDetected("transform classification contradicts the verdict for h (expected " + r.expected +
                                    ")");
    return r;
}

struct ViabilityReport {
    bool viable = false;
    double min_margin = 0.0;  // min of u2 - h(u1) on the window
    double at_t = 0.0, at_x = 0.0;
    double tol = 0.0;
};

/// epi(h) viability for the decoupled pair (Y1, Y2) with terminal (X1, X2).
inline ViabilityReport viability_check(const GeneratorSpec& gen, const ScalarFunction& h, const PayoffSpec& x1,
                                       const PayoffSpec& x2, double T, const PdeConfig& cfg = PdeConfig{},
                                       std::optional<double> tol = std::nullopt) {
    const SpaceGrid grid = default_space_grid(gen, T, cfg);
    for (std::size_t j = 0; j < grid.count; ++j) {
        const double a = h(x1(grid[j])), b = x2(grid[j]);
        if (a > b + 1e-12 * std::max(1.0, std::fabs(b)))
            throw InputNotInEpigraph("h(X1) > X2 at x = " + std::to_string(grid[j]));
    }
    auto u1 = solve_pde(gen, x1, T, cfg);
    auto u2 = solve_pde(gen, x2, T, cfg);
    ViabilityReport r;
    r.tol = tol.value_or(solver_tolerance(u1.space));
    const auto win = interior_window(u1.space, cfg.x0, T);
    r.min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < u1.time.count; ++n)
        for (std::size_t j = win.first; j <= win.last; ++j) {
            const double m = u2.at(n, j) - h(u1.at(n, j));
            if (m < r.min_margin) {
                r.min_margin = m;
                r.at_t = u1.time[n];
                r.at_x = u1.space[j];
            }
        }
    r.viable = r.min_margin >= -r.tol;
    return r;
}

inline void require_viable(const ViabilityReport& r) {
    if (!r.viable)
        throw ViabilityViolated("h(Y1) > Y2 + tol at (t, x) = (" + std::to_string(r.at_t) + ", " +
                                std::to_string(r.at_x) + "), margin " + std::to_string(r.min_margin));
}

struct AxiomResult {
    std::string id;
    bool passed = false;
    double deviation = 0.0;
    double tol = 0.0;
    std::string detail;
};

struct AxiomReport {
    std::string gen;
    std::vector<AxiomResult> results;
    bool passed() const {
        return std::all_of(results.begin(), results.end(), [](const AxiomResult& a) { return a.passed; });
    }
};

/// (A4') data for a two-piece partition {W_s <= c}, {W_s > c}.
struct LocalPropertyCase {
    PayoffSpec upper = PayoffSpec::from_expr("x + 1");  // on {W_s > c}
    PayoffSpec lower = PayoffSpec::from_expr("x");      // on {W_s <= c}
    double s = 0.5;
    double c = 0.0;
};

/// Route 1: glue the two PDE solves at time s and solve on [0, s].
inline double local_property_pde(const GeneratorSpec& gen, const LocalPropertyCase& lp, double T,
                                 const PdeConfig& cfg = PdeConfig{}) {
    const SpaceGrid grid = default_space_grid(gen, T, cfg);
    auto piece = [&](const PayoffSpec& p) {
        std::vector<double> term(grid.count);
        for (std::size_t j = 0; j < grid.count; ++j) term[j] = p(grid[j]);
        return solve_from_values(gen, grid, std::move(term), lp.s, T, time_steps_for(T - lp.s, grid.step(), cfg),
                                 cfg.boundary);
    };
    auto hi = piece(lp.upper), lo = piece(lp.lower);
    std::vector<double> glued(grid.count);
    // a node on the jump gets the average, otherwise the edge shifts by dx/2
    for (std::size_t j = 0; j < grid.count; ++j) {
        const double d = grid[j] - lp.c;
        glued[j] = std::fabs(d) < 1e-9 * grid.step() ? 0.5 * (hi.at(0, j) + lo.at(0, j)) : d > 0 ? hi.at(0, j) : lo.at(0, j);
    }
    auto front = solve_from_values(gen, grid, std::move(glued), 0.0, lp.s, time_steps_for(lp.s, grid.step(), cfg),
                                   cfg.boundary);
    return front.value(0.0, cfg.x0);
}

/// Route 2: the mixture 1_A X1 + 1_{A^c} X2 as a path functional, regression
/// split by the event after time s.
inline McResult local_property_mc(const GeneratorSpec& gen, const LocalPropertyCase& lp, double T,
                                  const McConfig& mc = McConfig{}) {
    const auto k = static_cast<std::size_t>(std::llround(lp.s / T * static_cast<double>(mc.steps)));
    const double c = lp.c;
    RegimeSplit split{k, [k, c](std::span<const double> w) { return w[k] > c ? 1 : 0; }};
    PathFunctional f = [k, c, up = lp.upper.phi, lo = lp.lower.phi](std::span<const double> w) {
        return w[k] > c ? up(w.back()) : lo(w.back());
    };
    McConfig m = mc;
    m.x0 = 0.0;
    return solve_mc_functional(gen, f, T, m, split);
}

/// (A1) comparison, (A2) terminal consistency, (A3) tower, (A4') local property.
inline AxiomReport axiom_suite(const GeneratorSpec& gen, const PdeConfig& cfg = PdeConfig{},
                               const McConfig& mc = McConfig{}, double T = 1.0) {
    AxiomReport rep;
    rep.gen = gen.source;
    const SpaceGrid grid = default_space_grid(gen, T, cfg);
    const double tol = solver_tolerance(grid);

    {  // A1
        AxiomResult a{"A1", true, std::numeric_limits<double>::infinity(), 1e-9, "u1 - u2 over the full grid"};
        const std::pair<const char*, const char*> pairs[] = {{"x + 1", "x"}, {"max(x, 0)", "min(x, 0)"}};
        for (const auto& [p1, p2] : pairs) {
            auto u1 = solve_pde(gen, PayoffSpec::from_expr(p1), T, cfg);
            auto u2 = solve_pde(gen, PayoffSpec::from_expr(p2), T, cfg);
            for (std::size_t k = 0; k < u1.surface.size(); ++k)
                a.deviation = std::min(a.deviation, u1.surface[k] - u2.surface[k]);
        }
        a.passed = a.deviation >= -a.tol;
        rep.results.push_back(a);
    }
    {  // A2
        AxiomResult a{"A2", true, 0.0, 0.0, "max |u(T,x) - phi(x)|"};
        for (const char* p : {"x", "abs(x)", "x*x"}) {
            auto ph = PayoffSpec::from_expr(p);
            auto u = solve_pde(gen, ph, T, cfg);
            const auto last = u.row(u.time.count - 1);
            for (std::size_t j = 0; j < u.space.count; ++j)
                a.deviation = std::max(a.deviation, std::fabs(last[j] - ph(u.space[j])));
        }
        a.passed = a.deviation <= a.tol;
        rep.results.push_back(a);
    }
    {  // A3
        AxiomResult a{"A3", true, 0.0, 2.0 * tol, "max |chain - direct| at t = 0 on the window"};
        for (const char* p : {"x", "max(x, 0)", "1"}) {
            auto ph = PayoffSpec::from_expr(p);
            auto direct = solve_pde(gen, ph, T, cfg);
            auto chain = conditional_g_expectation_path(gen, ph, T, {0.5 * T}, cfg);
            const auto win = interior_window(direct.space, cfg.x0, T);
            for (std::size_t j = win.first; j <= win.last; ++j)
                a.deviation = std::max(a.deviation, std::fabs(direct.at(0, j) - chain.stages.front().at(0, j)));
        }
        a.passed = a.deviation <= a.tol;
        rep.results.push_back(a);
    }
    {  // A4'
        LocalPropertyCase lp;
        lp.s = 0.5 * T;
        lp.c = cfg.x0;
        const double glued = local_property_pde(gen, lp, T, cfg);
        const auto mix = local_property_mc(gen, lp, T, mc);
        AxiomResult a{"A4'", true, std::fabs(glued - mix.y0), std::max(3.0 * mix.std_error, 2e-2),
                      "|glued PDE solve - MC solve of the mixture|"};
        a.passed = a.deviation <= a.tol;
        rep.results.push_back(a);
    }
    return rep;
}

inline void enforce_axioms(const AxiomReport& rep) {
    for (const auto& a : rep.results)
        if (!a.passed)
            throw AxiomViolated("axiom " + a.id + " violated for g = " + rep.gen + ": deviation " +
                                std::to_string(a.deviation) + " vs tolerance " + std::to_string(a.tol));
}

struct StabilityReport {
    std::vector<Decision> verdicts;
    Decision limit_verdict = Decision::neither;
    std::vector<double> distances;  // sup |h_k - h_limit| on the grid
    bool same_verdict = false;
    bool monotone = false;
    bool passed() const { return same_verdict && monotone; }
};

/// sqrt(y^2 + 1/k) tabulated on `grid`, converging uniformly to |y|.
inline std::vector<ScalarFunction> smoothed_abs_sequence(const std::vector<double>& ks,
                                                         const UniformGrid& grid = UniformGrid{-5.0, 5.0, 201}) {
    std::vector<ScalarFunction> out;
    for (double k : ks) {
        std::vector<double> v(grid.count);
        for (std::size_t j = 0; j < grid.count; ++j) v[j] = std::sqrt(grid[j] * grid[j] + 1.0 / k);
        out.push_back(ScalarFunction::tabulated(grid, std::move(v)));
    }
    return out;
}

inline StabilityReport stability_suite(const GeneratorSpec& gen, const std::vector<ScalarFunction>& seq,
                                       const ScalarFunction& limit,
                                       const UniformGrid& grid = UniformGrid{-5.0, 5.0, 201},
                                       const Scan& scan = Scan{}) {
    StabilityReport r;
    r.limit_verdict = check_shape(gen, limit, ShapeMode::convex, scan).decision;
    r.same_verdict = true;
    r.monotone = true;
    for (const auto& h : seq) {
        r.verdicts.push_back(check_shape(gen, h, ShapeMode::convex, scan).decision);
        r.same_verdict = r.same_verdict && r.verdicts.back() == r.limit_verdict;
        double d = 0.0;
        for (std::size_t j = 0; j < grid.count; ++j) d = std::max(d, std::fabs(h(grid[j]) - limit(grid[j])));
        if (!r.distances.empty() && d > r.distances.back() + 1e-12) r.monotone = false;
        r.distances.push_back(d);
    }
    return r;
}

struct CoherenceReport {
    Decision decision = Decision::neither;
    bool jensen_holds = false;
    std::optional<double> witness_gap;  // gap at (0, x0) of the witness scenario
    double tol = 0.0;
    bool coherent = false;
};

/// check_shape g_convex => Jensen holds; "neither" => the localized witness
/// scenario has a gap below -3 tol.
inline CoherenceReport criterion_solver_coherence(const Scenario& sc) {
    CoherenceReport r;
    auto v = check_shape(sc.gen, sc.h, ShapeMode::convex);
    r.decision = v.decision;
    auto j = verify_jensen(sc);
    r.jensen_holds = j.holds;
    r.tol = j.tol;
    if (v.decision == Decision::g_convex) {
        r.coherent = j.holds;
    } else {
        Scenario w = witness_scenario(sc.gen, sc.h, *v.witness, 0.1, v.scan);
        w.solver = sc.solver;
        auto wj = verify_jensen(w);
        r.witness_gap = wj.at_eval.front().gap;
        r.coherent = *r.witness_gap < -3.0 * r.tol;
    }
    return r;
}

} // namespace gconvex
