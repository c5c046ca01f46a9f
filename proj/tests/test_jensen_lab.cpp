#include <gtest/gtest.h>

#include <cmath>

#include "gconvex/jensen_lab.hpp"

using namespace gconvex;

namespace {

Scenario make(const std::string& gen, const std::string& payoff, const std::string& h, double T = 1.0) {
    Scenario sc;
    sc.id = gen + " | " + h;
    sc.gen = make_generator(gen);
    sc.payoff = PayoffSpec::from_expr(payoff);
    sc.h = ScalarFunction::symbolic(h);
    sc.T = T;
    sc.eval_times = {0.0, 0.5 * T};
    return sc;
}

} // namespace

TEST(Jensen, HoldsForConvexHUnderAbsZ) {
    auto r = verify_jensen(make("abs(z1)", "x", "y*y"));
    EXPECT_TRUE(r.holds);
    EXPECT_GE(r.min_gap, -r.tol);
    // u_X(0,0) = 0 + T, so the left side at (0,0) is h(1)
    EXPECT_NEAR(r.at_eval[0].lhs, 1.0, 5e-3);
    EXPECT_GT(r.points, 1000u);
    EXPECT_NEAR(r.window_hi - r.window_lo, 6.0, 0.1);
}

TEST(Jensen, FailsForExponentialDriverClosedForm) {
    // g = y, X = 1: h(u_X)(0) = e^2 while u_{h(X)}(0) = e
    auto r = verify_jensen(make("y", "1", "y*y"));
    EXPECT_FALSE(r.holds);
    EXPECT_NEAR(r.at_eval[0].gap, std::exp(1.0) - std::exp(2.0), 2e-2);
    EXPECT_NEAR(r.at_eval[1].gap, std::exp(0.5) - std::exp(1.0), 1e-2);
    EXPECT_NEAR(r.worst.t, 0.0, 1e-12);
}

TEST(Jensen, KeepsSurfacesOnRequest) {
    auto sc = make("0", "x", "y*y");
    EXPECT_EQ(verify_jensen(sc).u_x, nullptr);
    auto r = verify_jensen(sc, true);
    ASSERT_NE(r.u_x, nullptr);
    ASSERT_NE(r.u_hx, nullptr);
    // g = 0: E[W_T^2 | W_t = x] = x^2 + T - t, so the gap is T - t
    EXPECT_NEAR(r.at_eval[0].gap, 1.0, 5e-3);
    EXPECT_NEAR(r.at_eval[1].gap, 0.5, 5e-3);
}

TEST(Jensen, WitnessScenarioGapMatchesClosedForm) {
    // g = -|z|, h = |y|. For X = y* + z* W_T with |y*| >> |z*| sqrt(T):
    // u_X(0) = y* - |z*| T and u_{|X|}(0) = |y*| - |z*| T, gap = -2 |z*| T
    // when y* < 0.
    auto gen = make_generator("-abs(z1)");
    auto h = ScalarFunction::symbolic("abs(y)");
    auto v = check_shape(gen, h, ShapeMode::convex);
    ASSERT_EQ(v.decision, Decision::neither);
    ASSERT_TRUE(v.witness.has_value());
    auto sc = witness_scenario(gen, h, *v.witness);
    auto r = verify_jensen(sc);
    const double zs = v.witness->z.empty() ? Scan{}.z.hi : v.witness->z[0];
    ASSERT_LT(v.witness->y, 0.0);
    EXPECT_NEAR(r.at_eval[0].gap, -2.0 * std::fabs(zs) * sc.T, 1e-2);
    EXPECT_LT(r.at_eval[0].gap, -3.0 * r.tol);
}

TEST(Jensen, CoherenceBothDirections) {
    auto holds = criterion_solver_coherence(make("abs(z1)", "x", "abs(y)"));
    EXPECT_EQ(holds.decision, Decision::g_convex);
    EXPECT_TRUE(holds.jensen_holds);
    EXPECT_TRUE(holds.coherent);

    auto fails = criterion_solver_coherence(make("0.5*y + 2*z1", "x", "y*y"));
    EXPECT_EQ(fails.decision, Decision::neither);
    ASSERT_TRUE(fails.witness_gap.has_value());
    EXPECT_TRUE(fails.coherent);
}

TEST(Jensen, WindowMustContainNodes) {
    SpaceGrid g{10.0, 20.0, 11};
    EXPECT_THROW(interior_window(g, 0.0, 1.0), DomainTooSmall);
}

TEST(Process, ClassifiesTransforms) {
    auto gen = make_generator("abs(z1)");
    auto y = solve_pde(gen, PayoffSpec::from_expr("x"), 1.0);
    EXPECT_EQ(classify_process(gen, y, default_process_times(1.0)).kind, ProcessClass::g_martingale);
    auto sq = transform_surface(y, ScalarFunction::symbolic("y*y"));
    auto c = classify_process(gen, sq, default_process_times(1.0));
    EXPECT_EQ(c.kind, ProcessClass::g_submartingale);
    EXPECT_GT(c.max_discrepancy, c.tol);
}

TEST(Process, MixedSignsAreInconclusive) {
    // g = 0: W^3 has drift 3W, which changes sign across the window
    auto gen = make_generator("0");
    auto y = solve_pde(gen, PayoffSpec::from_expr("x"), 1.0);
    auto cube = transform_surface(y, ScalarFunction::symbolic("y*y*y"));
    EXPECT_THROW(classify_process(gen, cube, default_process_times(1.0)), InconclusiveClassification);
    EXPECT_THROW(classify_process(gen, y, {0.0}), PreconditionFailed);
}

TEST(Process, TransformSuiteMatchesVerdicts) {
    auto gen = make_generator("abs(z1)");
    std::vector<PayoffSpec> base{PayoffSpec::from_expr("x"), PayoffSpec::from_expr("max(x, 0)")};
    auto sub = martingale_transform_suite(gen, ScalarFunction::symbolic("y*y"), base);
    EXPECT_EQ(sub.expected, "g_submartingale");
    EXPECT_TRUE(sub.consistent);
    for (const auto& e : sub.entries) EXPECT_EQ(e.kind, ProcessClass::g_submartingale) << e.payoff;

    auto mart = martingale_transform_suite(gen, ScalarFunction::symbolic("y"), base);
    EXPECT_EQ(mart.expected, "g_martingale");
    for (const auto& e : mart.entries) EXPECT_EQ(e.kind, ProcessClass::g_martingale) << e.payoff;
}

TEST(Process, InverseEvidenceForNeither) {
    // g = y, Y = e^{1-t}: h(Y) = e^{2(1-t)} is a strict g-supermartingale
    auto rep = martingale_transform_suite(make_generator("y"), ScalarFunction::symbolic("y*y"),
                                          {PayoffSpec::constant(1.0)});
    EXPECT_EQ(rep.expected, "not_submartingale");
    EXPECT_TRUE(rep.inverse_evidence);
    EXPECT_EQ(rep.entries[0].kind, ProcessClass::g_supermartingale);
    EXPECT_EQ(rep.level, "evidence");
}

TEST(Viability, ExponentialDriverLeavesEpigraph) {
    auto gen = make_generator("y");
    auto h = ScalarFunction::symbolic("y*y");
    auto r = viability_check(gen, h, PayoffSpec::constant(1.0), PayoffSpec::constant(1.0), 1.0);
    EXPECT_FALSE(r.viable);
    EXPECT_NEAR(r.min_margin, std::exp(1.0) - std::exp(2.0), 2e-2);
    EXPECT_NEAR(r.at_t, 0.0, 1e-12);
    EXPECT_THROW(require_viable(r), ViabilityViolated);
}

TEST(Viability, ConvexHStaysInEpigraph) {
    auto gen = make_generator("abs(z1)");
    auto r = viability_check(gen, ScalarFunction::symbolic("y*y"), PayoffSpec::from_expr("x"),
                             PayoffSpec::from_expr("x*x + 1"), 1.0);
    EXPECT_TRUE(r.viable);
    EXPECT_NO_THROW(require_viable(r));
}

TEST(Viability, RejectsInputOutsideEpigraph) {
    auto gen = make_generator("0");
    EXPECT_THROW(viability_check(gen, ScalarFunction::symbolic("y*y"), PayoffSpec::from_expr("x"),
                                 PayoffSpec::constant(0.0), 1.0),
                 InputNotInEpigraph);
}

TEST(Axioms, HoldForStandardGenerators) {
    McConfig mc;
    mc.paths = 4000;
    mc.steps = 50;
    mc.bootstrap = 8;
    for (const char* src : {"abs(z1)", "y", "0.5*y + 2*z1"}) {
        auto rep = axiom_suite(make_generator(src), PdeConfig{}, mc);
        ASSERT_EQ(rep.results.size(), 4u);
        for (const auto& a : rep.results) EXPECT_TRUE(a.passed) << src << " " << a.id << " dev " << a.deviation;
        EXPECT_NO_THROW(enforce_axioms(rep));
    }
}

TEST(Axioms, LocalPropertyGlueMatchesClosedForm) {
    // g = 0: glued value is E[W_s + 1_{W_s > 0}] = 1/2
    LocalPropertyCase lp;
    EXPECT_NEAR(local_property_pde(make_generator("0"), lp, 1.0), 0.5, 5e-3);
}

TEST(Axioms, EnforceThrowsOnFailure) {
    AxiomReport rep;
    rep.gen = "test";
    rep.results.push_back({"A1", false, -1.0, 1e-9, ""});
    EXPECT_THROW(enforce_axioms(rep), AxiomViolated);
}

TEST(Stability, SmoothedAbsConvergesUnderAbsZ) {
    auto gen = make_generator("abs(z1)");
    auto seq = smoothed_abs_sequence({1, 4, 16, 64});
    auto r = stability_suite(gen, seq, ScalarFunction::symbolic("abs(y)"));
    EXPECT_EQ(r.limit_verdict, Decision::g_convex);
    for (auto d : r.verdicts) EXPECT_EQ(d, Decision::g_convex);
    EXPECT_TRUE(r.monotone);
    EXPECT_TRUE(r.passed());
    // sup |sqrt(y^2 + 1/k) - |y|| = 1/sqrt(k), attained at y = 0
    EXPECT_NEAR(r.distances[0], 1.0, 1e-12);
    EXPECT_NEAR(r.distances[3], 0.125, 1e-12);
}
