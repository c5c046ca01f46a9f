// Jensen gap E^g[h(X)] - h(E^g[X]) at t = 0 for h = y^2 under a few drivers.
// Negative means the inequality fails; the driver g = y fails for X = 1.

#include <cstdio>

#include "gconvex/convexity.hpp"
#include "gconvex/jensen_lab.hpp"

using namespace gconvex;

int main() {
    struct Row {
        const char* gen;
        const char* payoff;
    };
    const Row rows[] = {{"0", "x"}, {"abs(z1)", "x"}, {"2*z1", "x"}, {"-y", "x"}, {"y", "1"}, {"0.5*y + 2*z1", "x"}};

    std::printf("%-14s %-7s %-10s %12s %8s\n", "g", "X", "check", "gap(0,0)", "holds");
    for (const auto& r : rows) {
        Scenario sc;
        sc.gen = make_generator(r.gen);
        sc.payoff = PayoffSpec::from_expr(r.payoff);
        sc.h = ScalarFunction::symbolic("y*y");
        const auto shape = check_shape(sc.gen, sc.h, ShapeMode::convex);
        const auto rep = verify_jensen(sc);
        std::printf("%-14s %-7s %-10s %12.6f %8s\n", r.gen, r.payoff, to_string(shape.decision),
                    rep.at_eval.front().gap, rep.holds ? "yes" : "no");
    }
}
