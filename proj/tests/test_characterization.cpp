#include <gtest/gtest.h>

#include <cmath>

#include "gconvex/characterization.hpp"

using namespace gconvex;

namespace {
GeneratorSpec gen(const char* s) { return make_generator(s); }
} // namespace

TEST(SuperHomogeneity, Examples) {
    EXPECT_TRUE(super_homogeneity_test(gen("abs(z1)")).verdict);

    auto r = super_homogeneity_test(gen("-abs(z1)"));
    EXPECT_FALSE(r.verdict);
    ASSERT_TRUE(r.witness);
    ASSERT_TRUE(r.witness->lambda);
    EXPECT_LT(*r.witness->lambda, 0.0);
    EXPECT_LT(r.margin, -kSymbolicTolerance);
    // the hand-checked instance from the sign analysis: lambda = -1, z = 1
    EXPECT_LT(gen("-abs(z1)")(0.0, 0.0, -1.0) - (-1.0) * gen("-abs(z1)")(0.0, 0.0, 1.0), 0.0);

    auto lin = super_homogeneity_test(gen("2*z1"));
    EXPECT_TRUE(lin.verdict);
    EXPECT_EQ(lin.margin, 0.0);
}

TEST(SuperHomogeneity, YDependentFails) {
    auto r = super_homogeneity_test(gen("y + abs(z1)"));
    EXPECT_FALSE(r.verdict);
    EXPECT_EQ(r.reason, "dependent_on_y");
    ASSERT_TRUE(r.witness);
    EXPECT_LT(r.margin, -kSymbolicTolerance);
}

TEST(SuperHomogeneity, LambdaGridContents) {
    auto l = default_lambda_grid();
    EXPECT_EQ(l.size(), 59u);
    for (double v : {-3.0, -0.5, 0.0, 3.0}) EXPECT_NE(std::find(l.begin(), l.end(), v), l.end());
}

TEST(Predictor, Examples) {
    EXPECT_TRUE(jensen_all_convex_predictor(gen("abs(z1)")));
    EXPECT_TRUE(jensen_all_convex_predictor(gen("2*z1")));
    EXPECT_FALSE(jensen_all_convex_predictor(gen("y")));
    EXPECT_FALSE(jensen_all_convex_predictor(gen("-abs(z1)")));
}

TEST(Predictor, ConsistentWithConvexCatalog) {
    for (const char* g : {"abs(z1)", "2*z1", "y", "-abs(z1)", "norm(z)", "0.5*y + 2*z1"}) {
        auto G = gen(g);
        const bool predicted = jensen_all_convex_predictor(G);
        bool all = true;
        for (const auto& h : convex_function_catalog()) {
            auto v = check_shape(G, ScalarFunction::symbolic(h), ShapeMode::convex);
            if (v.decision != Decision::g_convex) {
                all = false;
                EXPECT_TRUE(v.witness.has_value());
            }
        }
        EXPECT_EQ(predicted, all) << g;
    }
}

TEST(SelfFinancing, Examples) {
    auto a = gen("abs(z1)");
    EXPECT_TRUE(self_financing_test(a).verdict);
    EXPECT_TRUE(zero_interest_test(a).verdict);
    auto y = gen("y");
    EXPECT_TRUE(self_financing_test(y).verdict);
    auto zi = zero_interest_test(y);
    EXPECT_FALSE(zi.verdict);
    ASSERT_TRUE(zi.witness);
    EXPECT_EQ(*zi.witness->c, 1.0);
    auto one = gen("1");
    EXPECT_FALSE(self_financing_test(one).verdict);
    EXPECT_FALSE(zero_interest_test(one).verdict);
}

TEST(SelfFinancing, RoutesAgreeOnCatalogGenerators) {
    for (const char* g : {"abs(z1)", "y", "1", "-abs(z1)", "2*z1", "0.5*y + 2*z1", "-y", "abs(z1) + 1", "t*z1"}) {
        EXPECT_NO_THROW(self_financing_test(gen(g))) << g;
        EXPECT_NO_THROW(zero_interest_test(gen(g))) << g;
        EXPECT_NO_THROW(translation_invariance_test(gen(g))) << g;
    }
}

TEST(SelfFinancing, InconsistentRoutesDetected) {
    // vanishes at y = 0 and y = +-1 only, so the (0, +-1) memberships hold
    // while the y-axis flag does not
    EXPECT_THROW(zero_interest_test(gen("min(abs(y), abs(abs(y) - 1))")),
                 InconsistentRoutes);
}

TEST(TranslationInvariance, Examples) {
    EXPECT_TRUE(translation_invariance_test(gen("abs(z1)")).verdict);
    auto r = translation_invariance_test(gen("y"));
    EXPECT_FALSE(r.verdict);
    ASSERT_TRUE(r.witness);
    EXPECT_EQ(*r.witness->c, 1.0);
    EXPECT_EQ(r.margin, -1.0);
    EXPECT_TRUE(translation_invariance_test(gen("t*z1")).verdict);
}

TEST(Periodicity, Examples) {
    EXPECT_EQ(periodicity_test(gen("abs(z1)"), 1).relation, "equal");
    auto ge = periodicity_test(gen("y"), 1);
    EXPECT_EQ(ge.relation, "ge");
    EXPECT_EQ(ge.margin, 1.0);
    EXPECT_EQ(periodicity_test(gen("-y"), 1).relation, "le");
    auto none = periodicity_test(gen("abs(y)"), 1);
    EXPECT_EQ(none.relation, "none");
    EXPECT_FALSE(none.verdict);
    EXPECT_THROW(periodicity_test(gen("y"), 0.0), PreconditionFailed);
}
