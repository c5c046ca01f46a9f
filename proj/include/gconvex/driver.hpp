#pragma once

// Generator (driver) specifications g(t,y,z): parsing, validation on a
// sampling box, Lipschitz estimation and structural classification.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gconvex/errors.hpp"
#include "gconvex/expr.hpp"
#include "gconvex/grid.hpp"

namespace gconvex {

/// Sampling box in (t, y, z)-space used for validation, Lipschitz
/// estimation and classification.
struct ValidationDomain {
    double t_lo = 0.0, t_hi = 1.0;
    double y_lo = -10.0, y_hi = 10.0;
    double z_lo = -10.0, z_hi = 10.0;
    std::size_t points = 101;  // per axis

    static ValidationDomain for_horizon(double T, int dim_z) {
        ValidationDomain d;
        d.t_hi = T;
        // 101^(2+d) evaluations is prohibitive past d = 1.
        d.points = dim_z <= 1 ? 101 : 41;
        return d;
    }
};

inline constexpr double kClassTolerance = 1e-12;

struct GeneratorFlags {
    bool independent_of_y = false;
    bool independent_of_z = false;
    bool zero_at_origin = false;
    bool zero_on_y_axis = false;
};

struct LipschitzEstimate {
    double value = 0.0;          // on the base grid
    double refined_value = 0.0;  // on the grid with every y/z cell halved
    bool non_lipschitz_warning = false;
};

/// A validated, immutable driver. Cheap to copy (the tree is shared).
struct GeneratorSpec {
    std::string source;
    expr::Expr ast;
    expr::Program program;
    int dim_z = 1;
    double mu_hat = 0.0;
    LipschitzEstimate lipschitz;
    GeneratorFlags flags;
    ValidationDomain domain;

    double operator()(double t, double y, std::span<const double> z) const { return program(t, y, z); }
    double operator()(double t, double y, double z) const { return program(t, y, std::span<const double>(&z, 1)); }
};

namespace detail {

/// Visits the sampling lattice. Axes for variables the expression does not
/// read collapse to a single node; results are identical and far cheaper.
struct Lattice {
    std::vector<double> ts, ys;
    std::vector<double> zs;  // 1-D axis shared by all components
    int dim_z = 1;

    Lattice(const expr::Expr& e, const ValidationDomain& d, int dim, std::size_t yz_points) : dim_z(dim) {
        ts = expr::uses_time(e) ? linspace(d.t_lo, d.t_hi, d.points) : std::vector<double>{d.t_lo};
        ys = expr::uses_state(e) ? linspace(d.y_lo, d.y_hi, yz_points) : std::vector<double>{0.0};
        zs = expr::uses_z(e) ? linspace(d.z_lo, d.z_hi, yz_points) : std::vector<double>{0.0};
    }

    std::size_t z_count() const {
        std::size_t n = 1;
        for (int k = 0; k < dim_z; ++k) n *= zs.size();
        return n;
    }

    void z_at(std::size_t flat, std::vector<double>& z) const {
        for (int k = dim_z - 1; k >= 0; --k) {
            z[static_cast<std::size_t>(k)] = zs[flat % zs.size()];
            flat /= zs.size();
        }
    }

    void z_index_at(std::size_t flat, std::vector<std::size_t>& idx) const {
        for (int k = dim_z - 1; k >= 0; --k) {
            idx[static_cast<std::size_t>(k)] = flat % zs.size();
            flat /= zs.size();
        }
    }
};

inline double lipschitz_on(const expr::Program& g, const expr::Expr& e, int dim_z, const ValidationDomain& d,
                           std::size_t yz_points) {
    Lattice lat(e, d, dim_z, yz_points);
    const auto dz = static_cast<std::size_t>(dim_z);
    std::vector<double> z(dz), zn(dz);
    std::vector<std::size_t> zidx(dz);
    const std::size_t nz = lat.z_count();
    double best = 0.0;
    for (double t : lat.ts) {
        for (std::size_t zi = 0; zi < nz; ++zi) {
            lat.z_at(zi, z);
            lat.z_index_at(zi, zidx);
            double prev = 0.0;
            for (std::size_t i = 0; i < lat.ys.size(); ++i) {
                const double y = lat.ys[i];
                const double v = g(t, y, z);
                if (i > 0) best = std::max(best, std::fabs(v - prev) / (y - lat.ys[i - 1]));
                prev = v;
                for (std::size_t k = 0; k < dz; ++k) {
                    if (zidx[k] + 1 >= lat.zs.size()) continue;
                    zn = z;
                    zn[k] = lat.zs[zidx[k] + 1];
                    best = std::max(best, std::fabs(g(t, y, zn) - v) / (zn[k] - z[k]));
                }
            }
        }
    }
    return best;
}

inline void check_division_hazards(const expr::Expr& e, int dim_z, const ValidationDomain& d) {
    std::vector<expr::Expr> dens;
    expr::collect_denominators(e, dens);
    for (const auto& den : dens) {
        expr::Program p(den);
        Lattice lat(den, d, dim_z, d.points);
        std::vector<double> z(static_cast<std::size_t>(std::max(dim_z, 1)));
        bool pos = false, negative = false, zero = false;
        for (double t : lat.ts)
            for (std::size_t zi = 0; zi < lat.z_count(); ++zi) {
                lat.z_at(zi, z);
                for (double y : lat.ys) {
                    const double v = p(t, y, z);
                    if (v == 0.0 || !std::isfinite(v)) zero = true;
                    else if (v > 0) pos = true;
                    else negative = true;
                }
            }
        if (zero || (pos && negative))
            throw DivisionHazard("denominator '" + expr::to_string(den, expr::generator_grammar(dim_z)) +
                                 "' can vanish on the validation grid");
    }
}

} // namespace detail

/// Parses a driver expression with `dim_z` z-components and rejects
/// denominators that can vanish on `domain`.
inline expr::Expr parse_generator(std::string_view source, int dim_z,
                                  const ValidationDomain& domain = ValidationDomain{}) {
    if (dim_z < 1) throw PreconditionFailed("dim_z must be positive");
    if (source.find_first_not_of(" \t\r\n") == std::string_view::npos)
        throw SyntaxError(0, "empty expression");
    auto e = expr::parse(source, expr::generator_grammar(dim_z));
    detail::check_division_hazards(e, dim_z, domain);
    return e;
}

inline double eval_generator(const expr::Expr& e, double t, double y, std::span<const double> z) {
    return expr::eval(e, t, y, z);
}

/// Largest difference quotient |dg| / (|dy| + |dz|) over neighbouring lattice
/// pairs along each y / z_k axis. A refined pass (halved cells) flags
/// estimates that keep growing: ratio > 1.5 raises the warning.
inline LipschitzEstimate estimate_lipschitz(const expr::Expr& e, int dim_z, const ValidationDomain& domain) {
    if (domain.points < 2) throw PreconditionFailed("Lipschitz estimation needs >= 2 points per axis");
    expr::Program p(e);
    LipschitzEstimate est;
    est.value = detail::lipschitz_on(p, e, dim_z, domain, domain.points);
    est.refined_value = detail::lipschitz_on(p, e, dim_z, domain, 2 * domain.points - 1);
    est.non_lipschitz_warning =
        est.value > 0.0 ? est.refined_value / est.value > 1.5 : est.refined_value > 0.0;
    return est;
}

inline GeneratorFlags classify_generator(const expr::Expr& e, int dim_z, const ValidationDomain& domain,
                                         double tol = kClassTolerance) {
    expr::Program g(e);
    detail::Lattice lat(e, domain, dim_z, domain.points);
    std::vector<double> z(static_cast<std::size_t>(dim_z)), zero(static_cast<std::size_t>(dim_z), 0.0);

    double y_var = 0.0, z_var = 0.0, origin = 0.0, axis = 0.0;
    for (double t : lat.ts) {
        origin = std::max(origin, std::fabs(g(t, 0.0, zero)));
        for (double y : lat.ys) axis = std::max(axis, std::fabs(g(t, y, zero)));
        // y-variation at fixed (t, z); z-variation at fixed (t, y)
        std::vector<double> zmin(lat.ys.size(), std::numeric_limits<double>::infinity());
        std::vector<double> zmax(lat.ys.size(), -std::numeric_limits<double>::infinity());
        for (std::size_t zi = 0; zi < lat.z_count(); ++zi) {
            lat.z_at(zi, z);
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (std::size_t i = 0; i < lat.ys.size(); ++i) {
                const double v = g(t, lat.ys[i], z);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
                zmin[i] = std::min(zmin[i], v);
                zmax[i] = std::max(zmax[i], v);
            }
            y_var = std::max(y_var, hi - lo);
        }
        for (std::size_t i = 0; i < lat.ys.size(); ++i) z_var = std::max(z_var, zmax[i] - zmin[i]);
    }
    GeneratorFlags f;
    f.independent_of_y = y_var <= tol;
    f.independent_of_z = z_var <= tol;
    f.zero_at_origin = origin <= tol;
    f.zero_on_y_axis = axis <= tol;
    // The axis scan samples y = 0 only when the lattice contains it.
    if (f.zero_on_y_axis) f.zero_on_y_axis = f.zero_at_origin;
    return f;
}

/// Full pipeline: parse, validate, estimate Lipschitz constant, classify.
inline GeneratorSpec make_generator(std::string_view source, int dim_z = 1, double horizon = 1.0) {
    GeneratorSpec s;
    s.source = std::string(source);
    s.dim_z = dim_z;
    s.domain = ValidationDomain::for_horizon(horizon, dim_z);
    s.ast = parse_generator(source, dim_z, s.domain);
    s.program = expr::Program(s.ast);
    s.lipschitz = estimate_lipschitz(s.ast, dim_z, s.domain);
    s.mu_hat = s.lipschitz.value;
    if (!std::isfinite(s.mu_hat)) throw InputError("NonLipschitz", "Lipschitz estimate is not finite");
    s.flags = classify_generator(s.ast, dim_z, s.domain);
    return s;
}

inline std::string generator_to_string(const GeneratorSpec& g) {
    return expr::to_string(g.ast, expr::generator_grammar(g.dim_z));
}

} // namespace gconvex
