#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "gconvex/pde_solver.hpp"

using namespace gconvex;

namespace {

// Closed forms, derived by substitution into the BSDE.
//   g = a*y:           E_{t,T}[c] = c e^{a(T-t)}
//   g = a*y + b*z:     E_{t,T}[W_T] at W_t = x is e^{a(T-t)} (x + b(T-t))
//   g = |z|, X = +-W_T: Y_t = +-W_t + (T-t)
double linear_const(double a, double c, double tau) { return c * std::exp(a * tau); }
double linear_affine(double a, double b, double x, double tau) { return std::exp(a * tau) * (x + b * tau); }

PdeConfig quick() {
    PdeConfig c;
    c.boundary_probe = false;
    return c;
}

} // namespace

TEST(SolvePde, MartingaleIsExact) {
    auto r = solve_pde(make_generator("0"), PayoffSpec::from_expr("x"), 1.0);
    EXPECT_NEAR(r.y0, 0.0, 1e-6);
}

TEST(SolvePde, ExponentialForLinearDriver) {
    auto r = solve_pde(make_generator("y"), PayoffSpec::constant(1.0), 1.0);
    EXPECT_NEAR(r.y0, std::exp(1.0), 1e-3);
    EXPECT_NEAR(r.value(0.5, 0.0), std::exp(0.5), 1e-3);
    EXPECT_LE(r.diagnostics.dt, kStabilityRatio * r.diagnostics.dx * r.diagnostics.dx);
}

TEST(SolvePde, AbsZClosedForm) {
    auto g = make_generator("abs(z1)");
    EXPECT_NEAR(solve_pde(g, PayoffSpec::from_expr("x"), 1.0).y0, 1.0, 1e-3);
    EXPECT_NEAR(solve_pde(g, PayoffSpec::from_expr("-x"), 1.0).y0, 1.0, 1e-3);
    // Z = +-1 along the surface interior
    auto r = solve_pde(g, PayoffSpec::from_expr("-x"), 1.0);
    EXPECT_NEAR(r.z_at(0, r.space.count / 2), -1.0, 1e-9);
}

TEST(SolvePde, TerminalRowIsPayoffExactly) {
    auto p = PayoffSpec::from_expr("x*x - abs(x)");
    auto r = solve_pde(make_generator("abs(z1) + 0.3*y"), p, 0.7, quick());
    const auto last = r.row(r.time.count - 1);
    for (std::size_t j = 0; j < r.space.count; ++j) ASSERT_EQ(last[j], p(r.space[j]));
    for (double v : r.surface) ASSERT_TRUE(std::isfinite(v));
}

TEST(SolvePde, StabilityViolation) {
    PdeConfig c = quick();
    c.nt = 10;
    EXPECT_THROW(solve_pde(make_generator("0"), PayoffSpec::from_expr("x"), 1.0, c), StabilityViolation);
}

TEST(SolvePde, DomainTooSmall) {
    // A narrow box with curved data: the boundary closures disagree at x0.
    PdeConfig c;
    c.domain = std::make_pair(-1.0, 1.0);
    c.nx = 81;
    EXPECT_THROW(solve_pde(make_generator("abs(z1)"), PayoffSpec::from_expr("abs(x)"), 1.0, c), DomainTooSmall);
    // The default box is wide enough for the same problem.
    EXPECT_NO_THROW(solve_pde(make_generator("abs(z1)"), PayoffSpec::from_expr("abs(x)"), 1.0));
}

TEST(SolvePde, GrowthBoundChecked) {
    auto p = PayoffSpec::from_expr("x*x*x*x*x*x");
    p.growth = GrowthBound{1.0, 2.0};
    EXPECT_THROW(solve_pde(make_generator("0"), p, 1.0, quick()), GrowthBoundViolated);
}

TEST(GExpectation, Examples) {
    EXPECT_NEAR(g_expectation(make_generator("0"), PayoffSpec::from_expr("x*x"), 0, 1, 0), 1.0, 1e-3);
    EXPECT_NEAR(g_expectation(make_generator("0.5*y + 2*z1"), PayoffSpec::from_expr("x"), 0, 1, 0),
                linear_affine(0.5, 2.0, 0.0, 1.0), 5e-3);
    EXPECT_NEAR(g_expectation(make_generator("abs(z1)"), PayoffSpec::from_expr("-x"), 0, 1, 0), 1.0, 1e-3);
}

TEST(GExpectation, TerminalTimeIsExact) {
    auto p = PayoffSpec::from_expr("abs(x - 0.3)");
    EXPECT_EQ(g_expectation(make_generator("y + abs(z1)"), p, 1.0, 1.0, 0.1), p(0.1));
}

TEST(GExpectation, OffCentreEvaluation) {
    auto g = make_generator("0.5*y + 2*z1");
    EXPECT_NEAR(g_expectation(g, PayoffSpec::from_expr("x"), 0.25, 1, 0.7), linear_affine(0.5, 2.0, 0.7, 0.75), 5e-3);
}

TEST(GExpectation, PreconditionOnTimes) {
    EXPECT_THROW(g_expectation(make_generator("0"), PayoffSpec::from_expr("x"), 1.5, 1.0, 0.0), PreconditionFailed);
}

TEST(ChainSolve, TowerExamples) {
    auto c0 = conditional_g_expectation_path(make_generator("0"), PayoffSpec::from_expr("x"), 1.0, {0.5}, quick());
    EXPECT_NEAR(c0.y0, 0.0, 1e-6);
    auto c1 = conditional_g_expectation_path(make_generator("abs(z1)"), PayoffSpec::from_expr("x"), 1.0, {0.5}, quick());
    EXPECT_NEAR(c1.y0, 1.0, 2e-3);
    auto c2 = conditional_g_expectation_path(make_generator("y"), PayoffSpec::constant(1.0), 1.0, {0.5}, quick());
    EXPECT_NEAR(c2.y0, std::exp(0.5) * std::exp(0.5), 2e-3);
    // intermediate surface matches the closed form at t = 0.5
    double mid = 0.0;
    interpolate(c2.stages[1].space, c2.surface_at(1).data(), 0.0, mid);
    EXPECT_NEAR(mid, linear_const(1.0, 1.0, 0.5), 1e-3);
}

TEST(ChainSolve, AgreesWithDirectSolve) {
    for (const char* gen : {"abs(z1)", "0.5*y + 2*z1", "y"}) {
        auto g = make_generator(gen);
        auto p = PayoffSpec::from_expr("max(x, -0.5*x)");
        const double direct = solve_pde(g, p, 1.0, quick()).y0;
        const double chained = conditional_g_expectation_path(g, p, 1.0, {0.3, 0.6}, quick()).y0;
        EXPECT_NEAR(direct, chained, 2e-3) << gen;
    }
}

TEST(ChainSolve, RejectsUnsortedTimes) {
    EXPECT_THROW(conditional_g_expectation_path(make_generator("0"), PayoffSpec::from_expr("x"), 1.0, {0.6, 0.3}),
                 PreconditionFailed);
}

TEST(Truncation, ClampExamples) {
    auto p = truncate_payoff(PayoffSpec::from_expr("x*x"), 5.0, 0.0);
    EXPECT_EQ(p(10.0), 25.0);
    EXPECT_EQ(p(3.0), 9.0);
    EXPECT_THROW(truncate_payoff(p, 0.0), PreconditionFailed);
}

TEST(Truncation, DifferenceDecreasesWithLevel) {
    auto g = make_generator("0");
    auto p = PayoffSpec::from_expr("x*x");
    const double full = solve_pde(g, p, 1.0, quick()).y0;
    double prev = std::numeric_limits<double>::infinity();
    for (double n = 1.0; n <= 10.0; n += 1.0) {
        const double diff = full - solve_pde(g, truncate_payoff(p, n), 1.0, quick()).y0;
        EXPECT_GE(diff, -1e-12);
        EXPECT_LE(diff, prev) << "level " << n;
        prev = diff;
    }
    EXPECT_LT(prev, 1e-9);
}

TEST(Properties, MonotonicityOfScheme) {
    // phi1 >= phi2 pointwise => u1 >= u2 everywhere.
    for (const char* gen : {"abs(z1)", "-abs(z1) + 0.5*y", "y*0.2 - 2*z1"}) {
        auto g = make_generator(gen);
        auto r1 = solve_pde(g, PayoffSpec::from_expr("max(x, 0) + 0.1"), 1.0, quick());
        auto r2 = solve_pde(g, PayoffSpec::from_expr("min(x, 0.5*x)"), 1.0, quick());
        for (std::size_t k = 0; k < r1.surface.size(); ++k) ASSERT_GE(r1.surface[k], r2.surface[k] - 1e-9) << gen;
    }
}

TEST(Properties, ConvergenceOrderForLinearDrivers) {
    struct Case {
        const char* gen;
        PayoffSpec payoff;
        double exact;
    };
    Case cases[] = {{"0.5*y + 2*z1", PayoffSpec::from_expr("x"), linear_affine(0.5, 2.0, 0.0, 1.0)},
                    {"y", PayoffSpec::constant(1.0), linear_const(1.0, 1.0, 1.0)}};
    for (auto& c : cases) {
        auto g = make_generator(c.gen);
        PdeConfig coarse = quick();
        coarse.nx = 101;
        PdeConfig fine = coarse;
        fine.nx = 201;  // same box, half the spacing
        const double e1 = std::fabs(solve_pde(g, c.payoff, 1.0, coarse).y0 - c.exact);
        const double e2 = std::fabs(solve_pde(g, c.payoff, 1.0, fine).y0 - c.exact);
        EXPECT_GE(e1 / e2, 3.0) << c.gen << ": " << e1 << " -> " << e2;
    }
}

TEST(SurfaceCsv, HeaderAndPrecision) {
    PdeConfig c = quick();
    c.nx = 5;
    c.domain = std::make_pair(-1.0, 1.0);
    auto r = solve_pde(make_generator("0"), PayoffSpec::from_expr("x"), 0.1, c);
    std::ostringstream os;
    write_surface_csv(r, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "t,x,u,z");
    std::size_t rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, r.time.count * r.space.count);
    EXPECT_NE(os.str().find("0.10000000000000001"), std::string::npos);  // 17 significant digits
}
