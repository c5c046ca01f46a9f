#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gconvex/convexity.hpp"

using namespace gconvex;

namespace {

GeneratorSpec gen(const char* s) { return make_generator(s); }
ScalarFunction fn(const char* s) { return ScalarFunction::symbolic(s); }

std::vector<double> z1(double v) { return {v}; }

// Lower convex hull of (ys, vs) by brute force: for each node the smallest
// chord value over all pairs (i, k) bracketing it. O(n^3); independent of
// the slope-sweep construction under test.
std::vector<double> hull_oracle(const std::vector<double>& ys, const std::vector<double>& vs) {
    const std::size_t n = ys.size();
    std::vector<double> out(vs);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i <= j; ++i)
            for (std::size_t k = j; k < n; ++k) {
                if (i == k) continue;
                const double w = (ys[j] - ys[i]) / (ys[k] - ys[i]);
                out[j] = std::min(out[j], (1.0 - w) * vs[i] + w * vs[k]);
            }
    return out;
}

} // namespace

TEST(LgOperator, Examples) {
    EXPECT_EQ(l_g_operator(gen("y"), fn("y*y"), 0, 1, z1(0)), -1.0);
    EXPECT_EQ(l_g_operator(gen("abs(z1)"), fn("y*y"), 0, 1, z1(1)), 1.0);
}

TEST(LgOperator, IdentityIsNeutral) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-4, 4);
    for (const char* g : {"y", "abs(z1)", "0.5*y + 2*z1", "max(y, z1) - t*abs(y*z1)", "-abs(z1) + 3"}) {
        auto G = gen(g);
        for (int k = 0; k < 200; ++k) ASSERT_EQ(l_g_operator(G, identity_function(), u(rng), u(rng), z1(u(rng))), 0.0);
    }
}

TEST(LgOperator, MatchesHandFormula) {
    // g = |z|, h = y^2: L = z^2 + 2|z|(|y| - y)
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-5, 5);
    auto G = gen("abs(z1)");
    auto h = fn("y*y");
    for (int k = 0; k < 500; ++k) {
        const double y = u(rng), z = u(rng);
        EXPECT_NEAR(l_g_operator(G, h, 0, y, z1(z)), z * z + 2 * std::fabs(z) * (std::fabs(y) - y), 1e-12);
    }
}

TEST(LgOperator, TabulatedNeedsSmoothNode) {
    auto t = fn("abs(y)").tabulate(UniformGrid{-1, 1, 3});  // jump 2 is below 100*dx = 100
    EXPECT_NO_THROW(l_g_operator(gen("abs(z1)"), t, 0, 0.0, z1(1)));
    auto fine = fn("abs(y)*1000").tabulate(UniformGrid{-1, 1, 201});  // jump 2000 > 100*0.01
    EXPECT_THROW(l_g_operator(gen("abs(z1)"), fine, 0, 0.0, z1(1)), DerivativeUnavailable);
    EXPECT_THROW(l_g_operator(gen("abs(z1)"), fine, 0, 0.005, z1(1)), DerivativeUnavailable);
    EXPECT_THROW(l_g_operator(gen("abs(z1)"), fine, 0, -1.0, z1(1)), DerivativeUnavailable);
    // Symbolic derivative trees agree with central differences off kinks.
    auto h = fn("y*y*y - 2*y + max(y, 0.5)");
    for (double y : {-2.0, -0.3, 0.2, 1.7}) {
        const double e = 1e-5;
        EXPECT_NEAR(h.d1(y), (h(y + e) - h(y - e)) / (2 * e), 1e-8);
    }
}

TEST(CheckShape, Examples) {
    auto v = check_shape(gen("abs(z1)"), fn("y*y"), ShapeMode::convex);
    EXPECT_EQ(v.decision, Decision::g_convex);
    EXPECT_EQ(v.min_margin, 0.0);
    EXPECT_FALSE(v.certificate);

    v = check_shape(gen("y"), fn("y*y"), ShapeMode::convex);
    EXPECT_EQ(v.decision, Decision::neither);
    ASSERT_TRUE(v.witness);
    EXPECT_TRUE(v.certificate);
    // L = z^2 - y^2: the most adverse point of the box is |y| = 5, z = 0
    EXPECT_EQ(v.min_margin, -25.0);
    EXPECT_EQ(v.witness->z, z1(0));

    v = check_shape(gen("abs(z1)"), fn("-y*y"), ShapeMode::concave);
    EXPECT_EQ(v.decision, Decision::neither);
    ASSERT_TRUE(v.witness);
    EXPECT_GT(v.witness->y, 0.0);
}

TEST(CheckShape, ModeAsymmetryForMinusIdentity) {
    auto G = gen("abs(z1)");
    auto h = fn("-y");
    EXPECT_EQ(check_shape(G, h, ShapeMode::convex).decision, Decision::g_convex);
    auto c = check_shape(G, h, ShapeMode::concave);
    EXPECT_EQ(c.decision, Decision::neither);
    EXPECT_NE(c.witness->z[0], 0.0);
}

TEST(CheckShape, DecisionMatchesMarginSign) {
    std::mt19937_64 rng(11);
    const char* gens[] = {"abs(z1)", "y", "-y", "2*z1", "0.5*y + 2*z1", "-abs(z1)", "0"};
    const char* hs[] = {"y*y", "y", "-y", "y*y*y", "2*y + 3", "y*y + 3*y", "-y*y", "0.5*y"};
    for (auto g : gens)
        for (auto h : hs)
            for (auto mode : {ShapeMode::convex, ShapeMode::concave, ShapeMode::affine}) {
                auto v = check_shape(gen(g), fn(h), mode);
                const bool lo = v.min_margin >= -v.tolerance, hi = v.max_margin <= v.tolerance;
                const bool ok = mode == ShapeMode::convex ? lo : mode == ShapeMode::concave ? hi : lo && hi;
                EXPECT_EQ(v.decision != Decision::neither, ok) << g << " / " << h;
                if (v.decision == Decision::neither) {
                    EXPECT_TRUE(v.witness.has_value());
                }
            }
}

TEST(CheckShape, CurvatureBeyondTheBox) {
    // L = -0.0005 z^2 + 1 + 0.001 y: positive on the box, negative for large |z|.
    auto v = check_shape(gen("1"), fn("-0.0005*y*y"), ShapeMode::convex);
    EXPECT_EQ(v.decision, Decision::neither);
    EXPECT_EQ(v.witness->reason, "curvature");
    EXPECT_LT(v.min_margin, 0.0);
}

TEST(CheckShape, TwoDimensionalZ) {
    auto G = make_generator("norm(z)", 2);
    auto v = check_shape(G, fn("y*y"), ShapeMode::convex, Scan::defaults(1.0, 2));
    EXPECT_EQ(v.decision, Decision::g_convex);
    EXPECT_EQ(v.points, 3u * 201u * 51u * 51u);
}

TEST(CheckNonsmooth, Examples) {
    const Scan s;
    auto abs_tab = fn("abs(y)").tabulate(s.y);
    EXPECT_EQ(check_nonsmooth(gen("abs(z1)"), abs_tab, s).decision, Decision::g_convex);
    auto v = check_nonsmooth(gen("-abs(z1)"), abs_tab, s);
    EXPECT_EQ(v.decision, Decision::neither);
    EXPECT_LT(v.witness->y, 0.0);
    EXPECT_EQ(check_nonsmooth(gen("0"), abs_tab, s).decision, Decision::g_convex);
}

TEST(CheckNonsmooth, SymbolicKinkRoutesThroughTable) {
    auto v = check_shape(gen("abs(z1)"), fn("abs(y)"), ShapeMode::convex);
    EXPECT_EQ(v.decision, Decision::g_convex);
    EXPECT_EQ(v.method, "nonsmooth");
}

// L_g |y| = -|z| + h'|z| = -2|z| for y < 0 under g = -|z|
TEST(CheckNonsmooth, SymbolicWitnessMarginIsExact) {
    auto g = gen("-abs(z1)");
    auto h = fn("abs(y)");
    auto v = check_shape(g, h, ShapeMode::convex);
    ASSERT_EQ(v.decision, Decision::neither);
    ASSERT_TRUE(v.witness.has_value());
    EXPECT_LT(v.witness->y, 0.0);
    EXPECT_EQ(v.min_margin, -2.0 * std::fabs(v.witness->z[0]));
    EXPECT_EQ(v.min_margin, l_g_operator(g, h, v.witness->t, v.witness->y, v.witness->z));
}

TEST(CheckNonsmooth, ConvexityStepCatchesNonConvexTables) {
    auto v = check_nonsmooth(gen("0"), fn("-abs(y)").tabulate(UniformGrid{-5, 5, 201}), Scan{});
    EXPECT_EQ(v.decision, Decision::neither);
    EXPECT_EQ(v.witness->reason, "second_difference");
    EXPECT_EQ(v.witness->y, 0.0);
}

TEST(CheckNonsmooth, GridTooCoarse) {
    EXPECT_THROW(check_nonsmooth(gen("0"), fn("y*y").tabulate(UniformGrid{-1, 1, 8}), Scan{}), GridTooCoarse);
}

TEST(CheckNonsmooth, GConvexImpliesConvex) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int k = 0; k < 40; ++k) {
        const double a = u(rng), b = u(rng), c = u(rng);
        std::vector<double> v(101);
        UniformGrid g{-5, 5, 101};
        for (std::size_t j = 0; j < v.size(); ++j) v[j] = std::max(a * g[j], b * g[j] + c) + 0.1 * u(rng);
        auto f = ScalarFunction::tabulated(g, v);
        for (const char* G : {"abs(z1)", "0"}) {
            auto verdict = check_nonsmooth(gen(G), f, Scan{});
            if (verdict.decision != Decision::g_convex) continue;
            for (std::size_t j = 1; j + 1 < v.size(); ++j)
                EXPECT_GE(f.table().at_node(j).second, -tabulated_tolerance(g));
        }
    }
}

TEST(AffineSets, PiA) {
    auto G = gen("abs(z1)");
    EXPECT_TRUE(pi_a_membership(G, {2, 3}).member);
    EXPECT_TRUE(pi_a_membership(G, {1, 0}).member);
    auto m = pi_a_membership(G, {-1, 0});
    EXPECT_FALSE(m.member);
    ASSERT_TRUE(m.witness);
    EXPECT_NE(m.witness->z[0], 0.0);
    for (const char* g : {"y", "0.5*y + 2*z1", "max(y, z1)"}) EXPECT_TRUE(pi_a_membership(gen(g), {1, 0}).member);
}

TEST(AffineSets, PiV) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int k = 0; k < 10; ++k) EXPECT_TRUE(pi_v_membership(gen("abs(z1)"), {u(rng), u(rng)}).member);
    EXPECT_FALSE(pi_v_membership(gen("y"), {2, -1}).member);
    EXPECT_TRUE(pi_v_membership(gen("y"), {2, 1}).member);
}

TEST(AffineSets, AffineConsistency) {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> u(-3, 3);
    for (const char* g : {"abs(z1)", "y", "2*z1", "-abs(z1)"}) {
        auto G = gen(g);
        for (int k = 0; k < 8; ++k) {
            const double a = u(rng), b = u(rng);
            const bool in_a = pi_a_membership(G, {a, b}).member;
            const std::string src = std::to_string(a) + "*y + " + std::to_string(b);
            auto v = check_shape(G, ScalarFunction::symbolic(src), ShapeMode::affine);
            EXPECT_EQ(in_a, v.decision == Decision::g_affine) << g << " " << src;
            if (in_a) {
                EXPECT_TRUE(pi_v_membership(G, {a, b}).member);
            }
        }
    }
}

TEST(Envelope, WShapeMatchesHull) {
    auto phi = fn("min(abs(y-1), abs(y+1))");
    UniformGrid g{-5, 5, 401};
    auto env = g_convex_envelope(gen("abs(z1)"), phi, g);
    ASSERT_TRUE(env.valid);
    std::vector<double> vs(g.count);
    for (std::size_t j = 0; j < g.count; ++j) vs[j] = phi(g[j]);
    auto hull = hull_oracle(g.nodes(), vs);
    double sup = 0.0;
    for (std::size_t j = 0; j < g.count; ++j) {
        sup = std::max(sup, std::fabs(env.values[j] - hull[j]));
        EXPECT_LE(env.values[j], vs[j] + kSymbolicTolerance);
    }
    EXPECT_LE(sup, 2.0 * g.step());
    EXPECT_EQ(env.verdict->decision, Decision::g_convex);
}

TEST(Envelope, ConvexPhiIsItsOwnEnvelope) {
    UniformGrid g{-5, 5, 401};
    auto env = g_convex_envelope(gen("abs(z1)"), fn("y*y"), g);
    double sup = 0.0;
    for (std::size_t j = 0; j < g.count; ++j) sup = std::max(sup, std::fabs(env.values[j] - g[j] * g[j]));
    EXPECT_LE(sup, 2.0 * g.step());
}

TEST(Envelope, LinearYDriverKeepsOnlyNonnegativeIntercepts) {
    UniformGrid g{-5, 5, 401};
    auto env = g_convex_envelope(gen("y"), fn("y*y"), g);
    ASSERT_TRUE(env.valid);
    for (double v : env.values) EXPECT_NEAR(v, 0.0, kSymbolicTolerance);
    for (const auto& p : env.kept) EXPECT_GE(p.b, 0.0);
}

TEST(Envelope, EmptyFamilyIsInvalid) {
    // g = y: (a, b) in Pi^v iff b >= 0. Minorants of y^2 with slopes 2 and 3
    // have intercepts -a^2/4 < 0, so nothing qualifies.
    auto env = g_convex_envelope(gen("y"), fn("y*y"), UniformGrid{-5, 5, 101}, {2.0, 3.0});
    EXPECT_FALSE(env.valid);
    EXPECT_FALSE(env.f.valid());
    for (double v : env.values) EXPECT_TRUE(std::isinf(v) && v < 0);
}

TEST(CombineSup, Examples) {
    auto r = combine_sup(gen("abs(z1)"), {fn("y*y"), fn("abs(y)")});
    EXPECT_EQ(r.verdict.decision, Decision::g_convex);
    EXPECT_EQ(r.f(0.5), 0.5);
    EXPECT_EQ(r.f(2.0), 4.0);

    r = combine_sup(gen("0"), {fn("y"), fn("-y")});
    EXPECT_EQ(r.verdict.decision, Decision::g_convex);
    EXPECT_EQ(r.f(-3.0), 3.0);

    auto one = combine_sup(gen("abs(z1)"), {fn("y*y")});
    EXPECT_EQ(one.f(1.5), 2.25);
    EXPECT_EQ(one.verdict.decision, Decision::g_convex);
}

TEST(CombineSup, Errors) {
    EXPECT_THROW(combine_sup(gen("abs(z1)"), {fn("y*y")}, fn("abs(y)")), DominationViolated);
    EXPECT_THROW(combine_sup(gen("y"), {fn("y*y")}), HypothesisNotVerified);
}

TEST(Composition, Examples) {
    EXPECT_EQ(check_composition(gen("abs(z1)"), fn("y*y"), fn("2*y + 3"), CompositionCase::affine_inner).decision,
              Decision::g_convex);
    EXPECT_EQ(check_composition(gen("0"), fn("max(y, 0)"), fn("y*y"), CompositionCase::increasing_outer).decision,
              Decision::g_convex);
    EXPECT_EQ(check_composition(gen("abs(z1)"), fn("abs(y)"), identity_function(), CompositionCase::affine_inner)
                  .decision,
              Decision::g_convex);
}

TEST(Composition, HypothesesChecked) {
    // -y is not g-affine under |z|
    EXPECT_THROW(check_composition(gen("abs(z1)"), fn("y*y"), fn("-y"), CompositionCase::affine_inner),
                 HypothesisNotVerified);
    // y^2 is not increasing
    EXPECT_THROW(check_composition(gen("0"), fn("y*y"), fn("y*y"), CompositionCase::increasing_outer),
                 HypothesisNotVerified);
}

TEST(SpecialCase, ZIndependent) {
    auto v = special_case_z_independent(gen("y"), fn("y*y"));
    EXPECT_EQ(v.decision, Decision::neither);
    auto w = special_case_z_independent(gen("y"), fn("y"));
    EXPECT_EQ(w.decision, Decision::g_convex);
    EXPECT_EQ(w.min_margin, 0.0);
    EXPECT_EQ(special_case_z_independent(gen("-y"), fn("y*y")).decision, Decision::g_convex);
    EXPECT_THROW(special_case_z_independent(gen("abs(z1)"), fn("y")), PreconditionFailed);
}

TEST(SpecialCase, AgreesWithFullScan) {
    for (const char* g : {"y", "-y", "2*y + 1", "abs(y)", "0", "-0.5*y"})
        for (const char* h : {"y*y", "y", "-y", "y*y + 3*y", "2*y + 1", "abs(y)", "max(y, 0)", "-y*y"}) {
            auto G = gen(g);
            const bool a = special_case_z_independent(G, fn(h)).decision == Decision::g_convex;
            const bool b = check_shape(G, fn(h), ShapeMode::convex).decision == Decision::g_convex;
            EXPECT_EQ(a, b) << g << " / " << h;
        }
}

TEST(SlopeBound, Examples) {
    auto r = slope_bound_check(gen("abs(z1)+1"), fn("0.5*y"));
    EXPECT_EQ(r.shape.decision, Decision::g_convex);
    EXPECT_NEAR(r.shape.min_margin, 0.5, 1e-12);
    EXPECT_TRUE(r.consistent);
    r = slope_bound_check(gen("abs(z1)+1"), fn("2*y"));
    EXPECT_EQ(r.shape.decision, Decision::neither);
    EXPECT_TRUE(r.consistent);
    EXPECT_THROW(slope_bound_check(gen("abs(z1)"), fn("y")), PreconditionFailed);
    EXPECT_THROW(slope_bound_check(gen("y+1"), fn("y")), PreconditionFailed);
}
