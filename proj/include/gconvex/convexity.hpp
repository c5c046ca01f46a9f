#pragma once

// Pointwise g-convexity criterion
//
//     L_g h (t,y,z) = 1/2 h''(y)|z|^2 + g(t, h(y), h'(y) z) - h'(y) g(t,y,z),
//
// g-convex <=> L_g h >= 0, g-concave <=> L_g h <= 0, g-affine <=> both.
// Every decision here comes from a finite scan: "neither" carries a witness
// point and is a certificate, the positive verdicts are evidence only.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gconvex/driver.hpp"
#include "gconvex/errors.hpp"
#include "gconvex/grid.hpp"
#include "gconvex/scalar_function.hpp"

namespace gconvex {

inline constexpr double kSymbolicTolerance = 1e-9;

enum class ShapeMode { convex, concave, affine };
enum class Decision { g_convex, g_concave, g_affine, neither };

inline const char* to_string(ShapeMode m) {
    switch (m) {
    case ShapeMode::convex: return "convex";
    case ShapeMode::concave: return "concave";
    default: return "affine";
    }
}

inline const char* to_string(Decision d) {
    switch (d) {
    case Decision::g_convex: return "g_convex";
    case Decision::g_concave: return "g_concave";
    case Decision::g_affine: return "g_affine";
    default: return "neither";
    }
}

/// (t, y, z) sampling grid; z is the product of one axis per coordinate.
struct Scan {
    std::vector<double> ts{0.0, 0.5, 1.0};
    UniformGrid y{-5.0, 5.0, 201};
    UniformGrid z{-5.0, 5.0, 51};
    int dim_z = 1;

    static Scan defaults(double T = 1.0, int dim_z = 1) {
        Scan s;
        s.ts = {0.0, T / 2.0, T};
        s.dim_z = dim_z;
        return s;
    }

    std::size_t z_count() const {
        std::size_t n = 1;
        for (int k = 0; k < dim_z; ++k) n *= z.count;
        return n;
    }

    // Flat index -> vector, first coordinate slowest (lexicographic order).
    void z_at(std::size_t flat, std::vector<double>& out) const {
        out.resize(static_cast<std::size_t>(dim_z));
        for (int k = dim_z - 1; k >= 0; --k) {
            out[static_cast<std::size_t>(k)] = z[flat % z.count];
            flat /= z.count;
        }
    }
};

struct ScanPoint {
    double t = 0.0;
    double y = 0.0;
    std::vector<double> z;  // empty for y-only conditions
    std::string reason;     // which condition the point violates
};

struct ConvexityVerdict {
    Decision decision = Decision::neither;
    ShapeMode mode = ShapeMode::convex;
    double min_margin = 0.0;
    double max_margin = 0.0;
    std::optional<ScanPoint> witness;
    Scan scan;
    double tolerance = kSymbolicTolerance;
    bool certificate = false;  // true only for "neither" with a witness
    std::string method = "symbolic";
    std::size_t points = 0;  // evaluated (t,y,z) points
};

struct AffinePair {
    double a = 0.0;
    double b = 0.0;
};

struct MembershipVerdict {
    bool member = false;
    double margin = 0.0;  // max deviation (Pi^a) or min slack (Pi^v)
    std::optional<ScanPoint> witness;
};

namespace detail {

/// Running min / max with the first (lexicographic) strict extremum kept.
struct Extremes {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    ScanPoint at_lo, at_hi;
    std::size_t count = 0;

    void add(double v, double t, double y, const std::vector<double>& z, const char* reason) {
        ++count;
        if (v < lo) {
            lo = v;
            at_lo = ScanPoint{t, y, z, reason};
        }
        if (v > hi) {
            hi = v;
            at_hi = ScanPoint{t, y, z, reason};
        }
    }
};

inline double norm_sq(const std::vector<double>& z) {
    double s = 0.0;
    for (double v : z) s += v * v;
    return s;
}

/// L_g from h, h', h'' values.
inline double l_g_from(const GeneratorSpec& gen, double t, double y, const std::vector<double>& z, double h0,
                       double h1, double h2, std::vector<double>& scratch) {
    scratch.resize(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) scratch[k] = h1 * z[k];
    return 0.5 * h2 * norm_sq(z) + gen(t, h0, scratch) - h1 * gen(t, y, z);
}

inline ConvexityVerdict decide(ShapeMode mode, const Extremes& ex, double tol) {
    ConvexityVerdict v;
    v.mode = mode;
    v.min_margin = ex.lo;
    v.max_margin = ex.hi;
    v.tolerance = tol;
    v.points = ex.count;
    const bool low_ok = ex.lo >= -tol, high_ok = ex.hi <= tol;
    switch (mode) {
    case ShapeMode::convex:
        v.decision = low_ok ? Decision::g_convex : Decision::neither;
        if (!low_ok) v.witness = ex.at_lo;
        break;
    case ShapeMode::concave:
        v.decision = high_ok ? Decision::g_concave : Decision::neither;
        if (!high_ok) v.witness = ex.at_hi;
        break;
    case ShapeMode::affine:
        v.decision = low_ok && high_ok ? Decision::g_affine : Decision::neither;
        if (!(low_ok && high_ok)) v.witness = -ex.lo >= ex.hi ? ex.at_lo : ex.at_hi;
        break;
    }
    v.certificate = v.decision == Decision::neither && v.witness.has_value();
    return v;
}

} // namespace detail

/// Kink threshold for tabulated h: left/right quotients further apart than
/// this are treated as points where h'' does not exist.
inline double kink_tolerance(const UniformGrid& g) { return 100.0 * g.step(); }
inline double tabulated_tolerance(const UniformGrid& g) { return 10.0 * g.step() * g.step(); }

/// L_g h at (t, y, z). Symbolic h uses its exact derivative trees; tabulated
/// h needs `y` to be an interior node where the one-sided quotients agree.
inline double l_g_operator(const GeneratorSpec& gen, const ScalarFunction& h, double t, double y,
                           const std::vector<double>& z) {
    if (static_cast<int>(z.size()) != gen.dim_z) throw PreconditionFailed("z has the wrong dimension");
    std::vector<double> scratch;
    if (h.is_symbolic()) return detail::l_g_from(gen, t, y, z, h(y), h.d1(y), h.d2(y), scratch);
    const auto& tab = h.table();
    const std::size_t j = tab.node_index(y);
    if (j == Tabulated::npos) throw DerivativeUnavailable("y = " + std::to_string(y) + " is not a table node");
    const auto d = tab.at_node(j);
    if (std::fabs(d.right - d.left) > kink_tolerance(tab.grid))
        throw DerivativeUnavailable("tabulated h has a kink at y = " + std::to_string(y));
    return detail::l_g_from(gen, t, y, z, tab.values[j], d.first, d.second, scratch);
}

/// Two-step test for continuous tabulated h: (1) second differences have the
/// sign of the mode everywhere, (2) L_g with difference-quotient derivatives
/// at every interior node that is not a kink.
inline ConvexityVerdict check_nonsmooth(const GeneratorSpec& gen, const ScalarFunction& h, const Scan& scan,
                                        ShapeMode mode = ShapeMode::convex) {
    const auto& tab = h.table();
    const double tol = tabulated_tolerance(tab.grid);
    const double kink = kink_tolerance(tab.grid);
    const std::size_t n = tab.values.size();

    // step 1: ordinary convexity / concavity
    for (std::size_t j = 1; j + 1 < n; ++j) {
        const double s = tab.at_node(j).second;
        const bool bad = (mode != ShapeMode::concave && s < -tol) || (mode != ShapeMode::convex && s > tol);
        if (bad) {
            ConvexityVerdict v;
            v.mode = mode;
            v.decision = Decision::neither;
            v.min_margin = v.max_margin = s;
            v.witness = ScanPoint{scan.ts.empty() ? 0.0 : scan.ts.front(), tab.grid[j], {}, "second_difference"};
            v.scan = scan;
            v.tolerance = tol;
            v.certificate = true;
            v.method = "nonsmooth";
            return v;
        }
    }

    // step 2: L_g where h'' exists numerically
    detail::Extremes ex;
    std::vector<double> z, scratch;
    std::size_t valid = 0;
    for (double t : scan.ts)
        for (std::size_t j = 1; j + 1 < n; ++j) {
            const auto d = tab.at_node(j);
            if (std::fabs(d.right - d.left) > kink) continue;
            if (t == scan.ts.front()) ++valid;
            const double y = tab.grid[j];
            for (std::size_t zi = 0; zi < scan.z_count(); ++zi) {
                scan.z_at(zi, z);
                ex.add(detail::l_g_from(gen, t, y, z, tab.values[j], d.first, d.second, scratch), t, y, z, "l_g");
            }
        }
    if (valid < 10)
        throw GridTooCoarse("only " + std::to_string(valid) + " grid points where h'' exists (need >= 10)");
    auto v = detail::decide(mode, ex, tol);
    v.scan = scan;
    v.method = "nonsmooth";
    return v;
}

/// Scan L_g h over the (t,y,z) grid. Non-smooth symbolic h (abs/max/min) and
/// tabulated h go through check_nonsmooth on the scan's y-grid.
///
/// A smooth h also has its curvature checked: as |z| grows the 1/2 h''|z|^2
/// term dominates, so h'' of the wrong sign is a violation beyond any finite
/// z box. The margin reported for that case is h''(y).
inline ConvexityVerdict check_shape(const GeneratorSpec& gen, const ScalarFunction& h, ShapeMode mode,
                                    const Scan& scan = Scan{}) {
    if (scan.ts.empty() || scan.y.count < 1 || scan.z.count < 1) throw PreconditionFailed("scan is empty");
    if (scan.dim_z != gen.dim_z) throw PreconditionFailed("scan dimension differs from the generator's");
    if (!h.is_symbolic()) return check_nonsmooth(gen, h, scan, mode);
    if (h.smoothness() != Smoothness::c2) {
        auto v = check_nonsmooth(gen, h.tabulate(scan.y), scan, mode);
        // the witness is off every kink, so the exact derivatives exist there;
        // report that value so the certificate re-evaluates bit for bit
        if (v.witness && v.witness->reason == "l_g") {
            const double exact = l_g_operator(gen, h, v.witness->t, v.witness->y, v.witness->z);
            const bool high = mode == ShapeMode::concave || (mode == ShapeMode::affine && exact > 0);
            (high ? v.max_margin : v.min_margin) = exact;
        }
        return v;
    }

    detail::Extremes ex;
    std::vector<double> z, scratch;
    const std::size_t nz = scan.z_count();
    for (double t : scan.ts)
        for (std::size_t j = 0; j < scan.y.count; ++j) {
            const double y = scan.y[j];
            const double h0 = h(y), h1 = h.d1(y), h2 = h.d2(y);
            for (std::size_t zi = 0; zi < nz; ++zi) {
                scan.z_at(zi, z);
                ex.add(detail::l_g_from(gen, t, y, z, h0, h1, h2, scratch), t, y, z, "l_g");
            }
        }
    auto v = detail::decide(mode, ex, kSymbolicTolerance);
    v.scan = scan;

    if (v.decision != Decision::neither) {
        for (std::size_t j = 0; j < scan.y.count; ++j) {
            const double y = scan.y[j], h2 = h.d2(y);
            const bool bad = (mode != ShapeMode::concave && h2 < -kSymbolicTolerance) ||
                             (mode != ShapeMode::convex && h2 > kSymbolicTolerance);
            if (!bad) continue;
            v.decision = Decision::neither;
            if (h2 < 0) v.min_margin = std::min(v.min_margin, h2);
            else v.max_margin = std::max(v.max_margin, h2);
            v.witness = ScanPoint{scan.ts.front(), y, {}, "curvature"};
            v.certificate = true;
            break;
        }
    }
    return v;
}

namespace detail {

inline double pair_slack(const GeneratorSpec& gen, AffinePair p, double t, double y, const std::vector<double>& z,
                         std::vector<double>& az) {
    az.resize(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) az[k] = p.a * z[k];
    return gen(t, p.a * y + p.b, az) - p.a * gen(t, y, z);
}

} // namespace detail

/// (a, b) in Pi^a: g(t, ay+b, az) = a g(t,y,z) on the scan.
inline MembershipVerdict pi_a_membership(const GeneratorSpec& gen, AffinePair p, const Scan& scan = Scan{}) {
    detail::Extremes ex;
    std::vector<double> z, az;
    for (double t : scan.ts)
        for (std::size_t j = 0; j < scan.y.count; ++j)
            for (std::size_t zi = 0; zi < scan.z_count(); ++zi) {
                scan.z_at(zi, z);
                const double y = scan.y[j];
                ex.add(std::fabs(detail::pair_slack(gen, p, t, y, z, az)), t, y, z, "pi_a");
            }
    MembershipVerdict v;
    v.margin = ex.hi;
    v.member = ex.hi <= kSymbolicTolerance;
    if (!v.member) v.witness = ex.at_hi;
    return v;
}

/// (a, b) in Pi^v: g(t, ay+b, az) >= a g(t,y,z) on the scan.
inline MembershipVerdict pi_v_membership(const GeneratorSpec& gen, AffinePair p, const Scan& scan = Scan{}) {
    detail::Extremes ex;
    std::vector<double> z, az;
    for (double t : scan.ts)
        for (std::size_t j = 0; j < scan.y.count; ++j)
            for (std::size_t zi = 0; zi < scan.z_count(); ++zi) {
                scan.z_at(zi, z);
                const double y = scan.y[j];
                ex.add(detail::pair_slack(gen, p, t, y, z, az), t, y, z, "pi_v");
            }
    MembershipVerdict v;
    v.margin = ex.lo;
    v.member = ex.lo >= -kSymbolicTolerance;
    if (!v.member) v.witness = ex.at_lo;
    return v;
}

struct EnvelopeResult {
    bool valid = false;
    UniformGrid grid;
    std::vector<double> values;  // -inf everywhere when invalid
    ScalarFunction f;            // empty when invalid
    std::vector<AffinePair> kept;
    std::size_t slopes_tried = 0;
    std::optional<ConvexityVerdict> verdict;  // check_nonsmooth on f
};

/// Slopes lo..hi symmetric about zero with 0 hit exactly when n is odd.
inline std::vector<double> default_slope_grid(const ScalarFunction& phi, const UniformGrid& y_grid,
                                              std::size_t n = 401) {
    double m = 0.0, prev = phi(y_grid[0]);
    for (std::size_t j = 1; j < y_grid.count; ++j) {
        const double v = phi(y_grid[j]);
        m = std::max(m, std::fabs(v - prev) / y_grid.step());
        prev = v;
    }
    const double w = m + 1.0;
    std::vector<double> s(n);
    for (std::size_t k = 0; k < n; ++k)
        s[k] = w * (2.0 * static_cast<double>(k) - static_cast<double>(n - 1)) / static_cast<double>(n - 1);
    return s;
}

/// sup of affine minorants a y + b*(a) of phi whose pair lies in Pi^v.
inline EnvelopeResult g_convex_envelope(const GeneratorSpec& gen, const ScalarFunction& phi,
                                        UniformGrid y_grid = UniformGrid{-5.0, 5.0, 401},
                                        std::vector<double> slopes = {}, const Scan& scan = Scan{}) {
    if (y_grid.count < 3) throw PreconditionFailed("envelope grid needs >= 3 points");
    if (slopes.empty()) slopes = default_slope_grid(phi, y_grid);
    std::vector<double> ph(y_grid.count);
    for (std::size_t j = 0; j < y_grid.count; ++j) {
        ph[j] = phi(y_grid[j]);
        if (!std::isfinite(ph[j])) throw PreconditionFailed("phi is not finite on the envelope grid");
    }

    EnvelopeResult out;
    out.grid = y_grid;
    out.slopes_tried = slopes.size();
    out.values.assign(y_grid.count, -std::numeric_limits<double>::infinity());
    for (double a : slopes) {
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < y_grid.count; ++j) b = std::min(b, ph[j] - a * y_grid[j]);
        if (!pi_v_membership(gen, {a, b}, scan).member) continue;
        out.kept.push_back({a, b});
        for (std::size_t j = 0; j < y_grid.count; ++j) out.values[j] = std::max(out.values[j], a * y_grid[j] + b);
    }
    if (out.kept.empty()) return out;
    out.valid = true;
    out.f = ScalarFunction::tabulated(y_grid, out.values);
    out.verdict = check_nonsmooth(gen, out.f, scan, ShapeMode::convex);
    return out;
}

struct SupResult {
    ScalarFunction f;
    ConvexityVerdict verdict;
};

/// Pointwise max of g-convex functions on `grid`, dominated by `dominator`
/// when one is given.
inline SupResult combine_sup(const GeneratorSpec& gen, const std::vector<ScalarFunction>& family,
                             const std::optional<ScalarFunction>& dominator = std::nullopt,
                             UniformGrid grid = UniformGrid{-5.0, 5.0, 201}, const Scan& scan = Scan{}) {
    if (family.empty()) throw PreconditionFailed("combine_sup needs a nonempty family");
    std::vector<double> f(grid.count, -std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < family.size(); ++k) {
        const auto& h = family[k];
        if (check_shape(gen, h, ShapeMode::convex, scan).decision != Decision::g_convex)
            throw HypothesisNotVerified("family member " + std::to_string(k) + " is not verdicted g_convex");
        for (std::size_t j = 0; j < grid.count; ++j) {
            const double v = h(grid[j]);
            if (dominator && v > (*dominator)(grid[j]) + kSymbolicTolerance)
                throw DominationViolated("family member " + std::to_string(k) + " exceeds the dominator at y = " +
                                         std::to_string(grid[j]));
            f[j] = std::max(f[j], v);
        }
    }
    SupResult out{ScalarFunction::tabulated(grid, std::move(f)), {}};
    out.verdict = check_nonsmooth(gen, out.f, scan, ShapeMode::convex);
    return out;
}

enum class CompositionCase { affine_inner, increasing_outer };

/// h o psi under either composition rule; the hypotheses are checked first.
inline ConvexityVerdict check_composition(const GeneratorSpec& gen, const ScalarFunction& h,
                                          const ScalarFunction& psi, CompositionCase which,
                                          const Scan& scan = Scan{}) {
    if (check_shape(gen, h, ShapeMode::convex, scan).decision != Decision::g_convex)
        throw HypothesisNotVerified("outer function is not verdicted g_convex");
    const ShapeMode inner_mode = which == CompositionCase::affine_inner ? ShapeMode::affine : ShapeMode::convex;
    if (check_shape(gen, psi, inner_mode, scan).decision == Decision::neither)
        throw HypothesisNotVerified(which == CompositionCase::affine_inner ? "inner function is not g-affine"
                                                                           : "inner function is not g-convex");
    if (which == CompositionCase::increasing_outer) {
        // h nondecreasing over the scan range and the range of psi on it
        double lo = scan.y.lo, hi = scan.y.hi;
        for (std::size_t j = 0; j < scan.y.count; ++j) {
            const double v = psi(scan.y[j]);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const UniformGrid r{lo, hi, 2001};
        double prev = h(r[0]);
        for (std::size_t j = 1; j < r.count; ++j) {
            const double v = h(r[j]);
            if (v < prev - kSymbolicTolerance)
                throw HypothesisNotVerified("outer function decreases near y = " + std::to_string(r[j]));
            prev = v;
        }
    }
    if (h.is_symbolic() && psi.is_symbolic()) {
        auto composed = ScalarFunction::from_expr(expr::substitute_state(h.ast(), psi.ast()), "y");
        return check_shape(gen, composed, ShapeMode::convex, scan);
    }
    std::vector<double> v(scan.y.count);
    for (std::size_t j = 0; j < scan.y.count; ++j) v[j] = h(psi(scan.y[j]));
    return check_nonsmooth(gen, ScalarFunction::tabulated(scan.y, std::move(v)), scan, ShapeMode::convex);
}

/// z-independent g: g-convex <=> h convex and g(t,h(y)) - h'(y) g(t,y) >= 0.
inline ConvexityVerdict special_case_z_independent(const GeneratorSpec& gen, const ScalarFunction& h,
                                                   const Scan& scan = Scan{}) {
    if (!gen.flags.independent_of_z) throw PreconditionFailed("generator depends on z");
    Scan flat = scan;
    flat.z = UniformGrid{0.0, 0.0, 1};
    if (!h.is_symbolic() || h.smoothness() != Smoothness::c2) {
        const auto tab = h.is_symbolic() ? h.tabulate(scan.y) : h;
        return check_nonsmooth(gen, tab, flat, ShapeMode::convex);
    }
    detail::Extremes ex;
    std::vector<double> zero(static_cast<std::size_t>(gen.dim_z), 0.0);
    for (double t : flat.ts)
        for (std::size_t j = 0; j < flat.y.count; ++j) {
            const double y = flat.y[j];
            ex.add(gen(t, h(y), zero) - h.d1(y) * gen(t, y, zero), t, y, zero, "z_independent");
        }
    auto v = detail::decide(ShapeMode::convex, ex, kSymbolicTolerance);
    v.scan = flat;
    v.method = "z_independent";
    if (v.decision == Decision::g_convex) {
        for (std::size_t j = 0; j < flat.y.count; ++j) {
            const double h2 = h.d2(flat.y[j]);
            if (h2 >= -kSymbolicTolerance) continue;
            v.decision = Decision::neither;
            v.min_margin = std::min(v.min_margin, h2);
            v.witness = ScanPoint{flat.ts.front(), flat.y[j], {}, "curvature"};
            v.certificate = true;
            break;
        }
    }
    return v;
}

struct SlopeBoundReport {
    ConvexityVerdict shape;
    bool positive_sign = false;  // g(t,0) > 0 somewhere on the scan
    bool negative_sign = false;  // g(t,0) < 0 somewhere on the scan
    double min_slope = 0.0;
    double max_slope = 0.0;
    bool consistent = true;
};

/// For y-independent g with g(t,0) > 0 (resp. < 0) somewhere, a g-convex h
/// has h' <= 1 (resp. h' >= 1). Reports whether check_shape agrees.
inline SlopeBoundReport slope_bound_check(const GeneratorSpec& gen, const ScalarFunction& h,
                                          const Scan& scan = Scan{}) {
    if (!gen.flags.independent_of_y) throw PreconditionFailed("generator depends on y");
    SlopeBoundReport r;
    std::vector<double> zero(static_cast<std::size_t>(gen.dim_z), 0.0);
    for (double t : scan.ts) {
        const double g0 = gen(t, 0.0, zero);
        r.positive_sign = r.positive_sign || g0 > kSymbolicTolerance;
        r.negative_sign = r.negative_sign || g0 < -kSymbolicTolerance;
    }
    if (!r.positive_sign && !r.negative_sign)
        throw PreconditionFailed("g(t,0) vanishes on the whole scan; the sign condition does not hold");

    r.min_slope = std::numeric_limits<double>::infinity();
    r.max_slope = -r.min_slope;
    for (std::size_t j = 0; j < scan.y.count; ++j) {
        double s;
        if (h.is_symbolic()) {
            s = h.d1(scan.y[j]);
        } else {
            const auto& tab = h.table();
            const std::size_t k = tab.node_index(scan.y[j]);
            if (k == Tabulated::npos || k == 0 || k + 1 >= tab.values.size()) continue;
            s = tab.at_node(k).first;
        }
        r.min_slope = std::min(r.min_slope, s);
        r.max_slope = std::max(r.max_slope, s);
    }
    r.shape = check_shape(gen, h, ShapeMode::convex, scan);
    if (r.shape.decision == Decision::g_convex) {
        if (r.positive_sign && r.max_slope > 1.0 + kSymbolicTolerance) r.consistent = false;
        if (r.negative_sign && r.min_slope < 1.0 - kSymbolicTolerance) r.consistent = false;
    }
    return r;
}

} // namespace gconvex
