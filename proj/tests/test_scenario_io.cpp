#include <gtest/gtest.h>

#include "gconvex/report.hpp"
#include "gconvex/scenario_io.hpp"
#include "gconvex/suite.hpp"

using namespace gconvex;

TEST(Batch, ParsesScenarioWithSolverBlock) {
    auto b = parse_batch(R"toml(
[[scenario]]
id = "a"
gen = "abs(z1)"
payoff = "x"
h = "y*y"
T = 2
times = [0, 1]
tol = 0.01
expect = "holds"
checks = ["jensen"]
[scenario.solver]
nx = 201
domain = [-10, 10]
)toml");
    ASSERT_EQ(b.scenarios.size(), 1u);
    const auto& s = b.scenarios[0];
    EXPECT_EQ(s.scenario.id, "a");
    EXPECT_DOUBLE_EQ(s.scenario.T, 2.0);
    EXPECT_EQ(s.scenario.eval_times, (std::vector<double>{0.0, 1.0}));
    EXPECT_DOUBLE_EQ(*s.scenario.tol, 0.01);
    EXPECT_EQ(s.scenario.solver.nx, 201u);
    ASSERT_TRUE(s.scenario.solver.domain.has_value());
    EXPECT_DOUBLE_EQ(s.scenario.solver.domain->first, -10.0);
    EXPECT_EQ(s.checks, (std::vector<std::string>{"jensen"}));
    EXPECT_DOUBLE_EQ(s.scenario.payoff(3.0), 3.0);
    EXPECT_DOUBLE_EQ(s.scenario.h(3.0), 9.0);
}

TEST(Batch, RejectsUnknownKeysEverywhere) {
    EXPECT_THROW(parse_batch("foo = 1\n"), InputError);
    EXPECT_THROW(parse_batch("[[scenario]]\ngen='0'\npayoff='x'\nh='y'\nextra=1\n"), InputError);
    EXPECT_THROW(parse_batch("[[scenario]]\ngen='0'\npayoff='x'\nh='y'\n[scenario.solver]\nnz=3\n"), InputError);
    EXPECT_THROW(parse_batch("[[characterization]]\ngen='0'\nwhat=true\n"), InputError);
}

TEST(Batch, RejectsBadValues) {
    EXPECT_THROW(parse_batch("[[scenario]]\npayoff='x'\nh='y'\n"), InputError);  // no gen
    EXPECT_THROW(parse_batch("[[scenario]]\ngen='0'\npayoff='x'\n"), InputError);  // no h
    EXPECT_THROW(parse_batch("[[scenario]]\ngen='0'\npayoff='x'\nh='y'\nT=-1\n"), InputError);
    EXPECT_THROW(parse_batch("[[scenario]]\ngen='0'\npayoff='x'\nh='y'\nexpect='maybe'\n"), InputError);
    EXPECT_THROW(parse_batch("[[scenario]]\ngen='0'\npayoff='x'\nh='y'\ntimes=[2]\n"), InputError);
    EXPECT_THROW(parse_batch("[[scenario]]\ngen='0'\npayoff='x'\nh='y'\nchecks=['magic']\n"), InputError);
    EXPECT_THROW(parse_batch("[[scenario]]\ngen='z1 @@'\npayoff='x'\nh='y'\n"), SyntaxError);
    EXPECT_THROW(parse_batch("[[scenario]]\ngen = \n"), InputError);  // TOML syntax
    EXPECT_THROW(parse_batch("[[scenario]]\nid='a'\ngen='0'\npayoff='x'\nh='y'\n"
                             "[[scenario]]\nid='a'\ngen='0'\npayoff='x'\nh='y'\n"),
                 InputError);
}

TEST(Batch, Characterization) {
    auto b = parse_batch("[[characterization]]\ngen='abs(z1)'\npredictor=true\n");
    ASSERT_EQ(b.characterizations.size(), 1u);
    EXPECT_EQ(b.characterizations[0].id, "abs(z1)");
    auto o = run_characterization(b.characterizations[0]);
    EXPECT_TRUE(o.passed());
    EXPECT_TRUE(o.predictor);
    EXPECT_EQ(o.catalog.size(), 6u);

    auto wrong = parse_batch("[[characterization]]\ngen='y'\npredictor=true\n");
    EXPECT_FALSE(run_characterization(wrong.characterizations[0]).passed());
}

TEST(Batch, SuiteFlagsExpectationMismatch) {
    auto b = parse_batch("[[scenario]]\nid='bad'\ngen='y'\npayoff='1'\nh='y*y'\nexpect='holds'\nchecks=['jensen']\n");
    auto r = run_suite(b);
    ASSERT_EQ(r.scenarios.size(), 1u);
    EXPECT_FALSE(r.passed());
    EXPECT_NE(r.scenarios[0].failures[0].find("expected Jensen to hold"), std::string::npos);
}

TEST(Report, RoundsToSignificantDigits) {
    json j{{"a", 2.718281828459045}, {"b", {1.0 / 3.0, 7}}, {"c", "text"}};
    auto r = round_numbers(j, 6);
    EXPECT_EQ(r["a"].get<double>(), 2.71828);
    EXPECT_EQ(r["b"][0].get<double>(), 0.333333);
    EXPECT_EQ(r["b"][1].get<int>(), 7);
    EXPECT_EQ(r.dump(), R"({"a":2.71828,"b":[0.333333,7],"c":"text"})");
}

TEST(Report, VerdictShape) {
    auto v = check_shape(make_generator("y"), ScalarFunction::symbolic("y*y"), ShapeMode::convex);
    auto j = to_json(v);
    for (const char* k : {"decision", "min_margin", "max_margin", "witness", "scan", "certificate"})
        EXPECT_TRUE(j.contains(k)) << k;
    EXPECT_EQ(j["decision"], "neither");
    EXPECT_TRUE(j["certificate"].get<bool>());
    EXPECT_TRUE(j["witness"].contains("t"));
}
