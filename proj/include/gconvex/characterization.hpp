#pragma once

// Generator-level structure tests that predict Jensen behaviour for whole
// classes of h: super-homogeneity in z, self-financing / zero-interest
// conditions, translation invariance and y-periodicity.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "gconvex/convexity.hpp"
#include "gconvex/driver.hpp"
#include "gconvex/errors.hpp"

namespace gconvex {

struct CharacterizationWitness {
    double t = 0.0;
    double y = 0.0;
    std::vector<double> z;
    std::optional<double> lambda;
    std::optional<double> c;
};

struct CharacterizationReport {
    std::string test;
    bool verdict = false;
    std::optional<CharacterizationWitness> witness;
    double margin = 0.0;
    std::string relation;  // periodicity_test only
    std::string reason;
};

inline std::vector<double> default_lambda_grid() {
    std::vector<double> l{-3, -2, -1, -0.5, 0, 0.5, 1, 2, 3};
    auto extra = linspace(-3.0, 3.0, 50);
    l.insert(l.end(), extra.begin(), extra.end());
    return l;
}

/// Order matters only for which failing constant is reported.
inline std::vector<double> translation_constants() { return {1.0, -1.0, 2.0, -2.0, std::numbers::pi / 3.0}; }

/// g(t, lambda z) >= lambda g(t, z) for all sampled lambda, z, t. A
/// y-dependent generator fails with the point of largest y-variation.
inline CharacterizationReport super_homogeneity_test(const GeneratorSpec& gen,
                                                     const std::vector<double>& lambdas = default_lambda_grid(),
                                                     const Scan& scan = Scan::defaults()) {
    CharacterizationReport r;
    r.test = "super_homogeneity";
    std::vector<double> z, lz;
    if (!gen.flags.independent_of_y) {
        r.reason = "dependent_on_y";
        double worst = 0.0;
        for (double t : scan.ts)
            for (std::size_t zi = 0; zi < scan.z_count(); ++zi) {
                scan.z_at(zi, z);
                const double g0 = gen(t, 0.0, z);
                for (std::size_t j = 0; j < scan.y.count; ++j) {
                    const double d = std::fabs(gen(t, scan.y[j], z) - g0);
                    if (d > worst) {
                        worst = d;
                        r.witness = CharacterizationWitness{t, scan.y[j], z, std::nullopt, std::nullopt};
                    }
                }
            }
        r.margin = -worst;
        return r;
    }
    double lo = std::numeric_limits<double>::infinity();
    for (double t : scan.ts)
        for (std::size_t zi = 0; zi < scan.z_count(); ++zi) {
            scan.z_at(zi, z);
            const double gz = gen(t, 0.0, z);
            for (double l : lambdas) {
                lz = z;
                for (double& v : lz) v *= l;
                const double m = gen(t, 0.0, lz) - l * gz;
                if (m < lo) {
                    lo = m;
                    r.witness = CharacterizationWitness{t, 0.0, z, l, std::nullopt};
                }
            }
        }
    r.margin = lo;
    r.verdict = lo >= -kSymbolicTolerance;
    if (r.verdict) r.witness.reset();
    return r;
}

/// Convex test functions used to probe predictor consistency.
inline std::vector<std::string> convex_function_catalog() {
    return {"y*y", "abs(y)", "max(y, 0)", "y*y + 3*y", "abs(y - 1) + 0.5*y", "max(2*y, -y) + y*y"};
}

/// Jensen holds for every convex h exactly when g is y-independent and
/// super-homogeneous in z.
inline bool jensen_all_convex_predictor(const GeneratorSpec& gen) {
    return gen.flags.independent_of_y && super_homogeneity_test(gen).verdict;
}

namespace detail {

inline CharacterizationReport flag_vs_membership(const std::string& name, bool flag,
                                                 const std::vector<AffinePair>& pairs, const GeneratorSpec& gen,
                                                 const Scan& scan) {
    CharacterizationReport r;
    r.test = name;
    bool members = true;
    double worst = 0.0;
    for (const auto& p : pairs) {
        auto m = pi_a_membership(gen, p, scan);
        if (!m.member) {
            members = false;
            r.witness = CharacterizationWitness{m.witness->t, p.b, std::vector<double>(m.witness->z.size(), 0.0),
                                                std::nullopt, p.b};
            worst = m.margin;
            break;
        }
        worst = std::max(worst, m.margin);
    }
    if (members != flag)
        throw InconsistentRoutes(name + ": generator flag says " + (flag ? "true" : "false") +
                                 " but the affine-membership route says " + (members ? "true" : "false"));
    r.verdict = flag;
    r.margin = -worst;
    return r;
}

} // namespace detail

/// g(t,0,0) = 0, i.e. h = 0 is g-affine.
inline CharacterizationReport self_financing_test(const GeneratorSpec& gen, const Scan& scan = Scan::defaults()) {
    return detail::flag_vs_membership("self_financing", gen.flags.zero_at_origin, {{0.0, 0.0}}, gen, scan);
}

/// g(t,y,0) = 0, i.e. constants are g-affine.
inline CharacterizationReport zero_interest_test(const GeneratorSpec& gen, const Scan& scan = Scan::defaults()) {
    return detail::flag_vs_membership("zero_interest", gen.flags.zero_on_y_axis, {{0.0, 1.0}, {0.0, -1.0}}, gen,
                                      scan);
}

/// g independent of y <=> y + c is g-affine for every c.
inline CharacterizationReport translation_invariance_test(const GeneratorSpec& gen,
                                                          const Scan& scan = Scan::defaults()) {
    CharacterizationReport r;
    r.test = "translation_invariance";
    r.verdict = true;
    double worst = 0.0;
    for (double c : translation_constants()) {
        auto m = pi_a_membership(gen, {1.0, c}, scan);
        if (!m.member) {
            // report the first failing constant and its own deviation
            r.verdict = false;
            r.witness = CharacterizationWitness{m.witness->t, m.witness->y, m.witness->z, std::nullopt, c};
            worst = m.margin;
            break;
        }
        worst = std::max(worst, m.margin);
    }
    r.margin = -worst;
    if (r.verdict != gen.flags.independent_of_y)
        throw InconsistentRoutes("translation_invariance: membership route disagrees with the y-independence flag");
    return r;
}

/// Pointwise relation of g(t, y+c, z) to g(t, y, z): equal, ge, le or none.
inline CharacterizationReport periodicity_test(const GeneratorSpec& gen, double c, const Scan& scan = Scan::defaults()) {
    if (c == 0.0) throw PreconditionFailed("periodicity constant must be nonzero");
    CharacterizationReport r;
    r.test = "periodicity";
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    CharacterizationWitness at_lo, at_hi;
    std::vector<double> z;
    for (double t : scan.ts)
        for (std::size_t j = 0; j < scan.y.count; ++j)
            for (std::size_t zi = 0; zi < scan.z_count(); ++zi) {
                scan.z_at(zi, z);
                const double y = scan.y[j];
                const double d = gen(t, y + c, z) - gen(t, y, z);
                if (d < lo) {
                    lo = d;
                    at_lo = {t, y, z, std::nullopt, c};
                }
                if (d > hi) {
                    hi = d;
                    at_hi = {t, y, z, std::nullopt, c};
                }
            }
    const double tol = kSymbolicTolerance;
    if (lo >= -tol && hi <= tol) {
        r.relation = "equal";
        r.margin = std::max(std::fabs(lo), std::fabs(hi));
    } else if (lo >= -tol) {
        r.relation = "ge";
        r.margin = lo;
        r.witness = at_lo;
    } else if (hi <= tol) {
        r.relation = "le";
        r.margin = hi;
        r.witness = at_hi;
    } else {
        r.relation = "none";
        r.margin = lo;
        r.witness = at_lo;
    }
    r.verdict = r.relation != "none";
    return r;
}

} // namespace gconvex
