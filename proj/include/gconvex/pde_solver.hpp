#pragma once

// g-expectations of Markovian terminal data phi(W_T) via the semilinear
// parabolic PDE
//
//     u_t + 1/2 u_xx + g(t, u, u_x) = 0,   u(T, x) = phi(x),
//
// so that E^g_{t,T}[phi(W_T)] = u(t, W_t) and Z_t = u_x(t, W_t).
//
// Scheme: explicit Euler backward in time, central differences in space,
// g evaluated at the later time level. Boundary nodes are extrapolated
// affinely from the interior. Stability requires dt <= 0.9 dx^2.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gconvex/driver.hpp"
#include "gconvex/errors.hpp"
#include "gconvex/grid.hpp"
#include "gconvex/scalar_function.hpp"

namespace gconvex {

inline constexpr double kStabilityRatio = 0.9;

/// |phi(x)| <= C (1 + |x|^m) on the solve domain.
struct GrowthBound {
    double C = 1e6;
    double m = 4.0;
};

/// Terminal data phi(W_T).
struct PayoffSpec {
    std::function<double(double)> phi;
    std::string label;
    GrowthBound growth;

    double operator()(double x) const { return phi(x); }

    static PayoffSpec from_expr(std::string_view source) {
        auto f = ScalarFunction::symbolic(source, "x");
        return PayoffSpec{[f](double x) { return f(x); }, f.describe(), {}};
    }

    static PayoffSpec from_function(ScalarFunction f, std::string label = {}) {
        if (label.empty()) label = f.describe();
        return PayoffSpec{[f = std::move(f)](double x) { return f(x); }, std::move(label), {}};
    }

    static PayoffSpec constant(double c) {
        return PayoffSpec{[c](double) { return c; }, expr::detail::format_number(c), {}};
    }

    void verify_growth(const SpaceGrid& grid) const {
        for (std::size_t j = 0; j < grid.count; ++j) {
            const double x = grid[j];
            const double v = phi(x);
            if (!std::isfinite(v) || std::fabs(v) > growth.C * (1.0 + std::pow(std::fabs(x), growth.m)))
                throw GrowthBoundViolated("payoff '" + label + "' violates its growth bound at x = " +
                                          std::to_string(x));
        }
    }
};

/// h(phi(x)).
inline PayoffSpec compose(const ScalarFunction& h, const PayoffSpec& phi) {
    return PayoffSpec{[h, p = phi.phi](double x) { return h(p(x)); }, "h(" + phi.label + ")", phi.growth};
}

/// phi((anchor - level) v x ^ (anchor + level)): the monotone truncation that
/// converges pointwise to phi as level grows.
inline PayoffSpec truncate_payoff(const PayoffSpec& payoff, double level, double anchor = 0.0) {
    if (!(level > 0)) throw PreconditionFailed("truncation level must be positive");
    const double lo = anchor - level, hi = anchor + level;
    return PayoffSpec{[p = payoff.phi, lo, hi](double x) { return p(std::clamp(x, lo, hi)); },
                      "trunc(" + payoff.label + ")", payoff.growth};
}

enum class BoundaryMode { affine_extrapolation, zero_gradient };

inline const char* to_string(BoundaryMode m) {
    return m == BoundaryMode::affine_extrapolation ? "affine_extrapolation" : "zero_gradient";
}

struct PdeConfig {
    std::size_t nx = 401;
    std::size_t nt = 0;       // 0: choose from dt_factor
    double dt_factor = 0.25;  // dt = dt_factor * dx^2 when nt == 0
    double x0 = 0.0;          // evaluation point, also the domain centre
    std::optional<std::pair<double, double>> domain;
    BoundaryMode boundary = BoundaryMode::affine_extrapolation;
    bool boundary_probe = true;
    double probe_tolerance = 1e-4;
};

struct SolveDiagnostics {
    std::string scheme = "explicit_euler_central";
    double dt = 0.0;
    double dx = 0.0;
    BoundaryMode boundary = BoundaryMode::affine_extrapolation;
    bool probed = false;
    double probe_delta = 0.0;
};

/// Value surface u(t_n, x_j) on a uniform time x space grid, row-major in time.
struct SolveResult {
    TimeGrid time;
    SpaceGrid space;
    std::vector<double> surface;
    double x0 = 0.0;
    double y0 = 0.0;  // u(time.lo, x0)
    SolveDiagnostics diagnostics;

    std::span<const double> row(std::size_t n) const {
        return {surface.data() + n * space.count, space.count};
    }
    double at(std::size_t n, std::size_t j) const { return surface[n * space.count + j]; }

    /// Grid index of time `t` (nearest node).
    std::size_t time_index(double t) const {
        const double pos = (t - time.lo) / time.step();
        return static_cast<std::size_t>(std::clamp(std::llround(pos), 0LL, static_cast<long long>(time.count - 1)));
    }

    /// Central quotient of row n at node j (one-sided at the ends): the Z component.
    double z_at(std::size_t n, std::size_t j) const {
        const double dx = space.step();
        if (j == 0) return (at(n, 1) - at(n, 0)) / dx;
        if (j + 1 == space.count) return (at(n, j) - at(n, j - 1)) / dx;
        return (at(n, j + 1) - at(n, j - 1)) / (2.0 * dx);
    }

    std::vector<double> z_surface() const {
        std::vector<double> z(surface.size());
        for (std::size_t n = 0; n < time.count; ++n)
            for (std::size_t j = 0; j < space.count; ++j) z[n * space.count + j] = z_at(n, j);
        return z;
    }

    /// Bilinear read; exact at grid nodes.
    double value(double t, double x) const {
        if (t < time.lo - 1e-12 || t > time.hi + 1e-12 || !space.contains(x))
            throw InterpolationOutOfRange("(t, x) = (" + std::to_string(t) + ", " + std::to_string(x) +
                                          ") outside the solved surface");
        const double pos = std::clamp((t - time.lo) / time.step(), 0.0, static_cast<double>(time.count - 1));
        auto n = static_cast<std::size_t>(std::floor(pos));
        double w = pos - static_cast<double>(n);
        if (std::fabs(w) < 1e-9 || n + 1 >= time.count) w = 0.0;
        if (std::fabs(w - 1.0) < 1e-9) w = 0.0, ++n;
        double a = 0.0, b = 0.0;
        interpolate(space, surface.data() + n * space.count, x, a);
        if (w == 0.0) return a;
        interpolate(space, surface.data() + (n + 1) * space.count, x, b);
        return (1.0 - w) * a + w * b;
    }
};

/// Spatial grid [x0 - w, x0 + w] with w = 6 sqrt(T) + mu_hat T.
inline SpaceGrid default_space_grid(const GeneratorSpec& gen, double horizon, const PdeConfig& cfg) {
    if (cfg.nx < 5) throw StabilityViolation("need at least 5 spatial nodes");
    if (cfg.domain) return SpaceGrid{cfg.domain->first, cfg.domain->second, cfg.nx};
    const double w = 6.0 * std::sqrt(horizon) + gen.mu_hat * horizon;
    return SpaceGrid{cfg.x0 - w, cfg.x0 + w, cfg.nx};
}

/// Number of time steps for [t_lo, t_hi] on spacing dx.
inline std::size_t time_steps_for(double span, double dx, const PdeConfig& cfg) {
    if (cfg.nt > 0) return cfg.nt;
    const double dt_max = cfg.dt_factor * dx * dx;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span / dt_max - 1e-9)));
}

namespace detail {

inline void apply_boundary(std::vector<double>& u, BoundaryMode mode) {
    const std::size_t n = u.size();
    if (mode == BoundaryMode::affine_extrapolation) {
        u[0] = 2.0 * u[1] - u[2];
        u[n - 1] = 2.0 * u[n - 2] - u[n - 3];
    } else {
        u[0] = u[1];
        u[n - 1] = u[n - 2];
    }
}

} // namespace detail

/// Backward sweep from `terminal` (values on `space` at time t_hi) down to
/// t_lo in `steps` explicit steps. Returns every time level.
inline SolveResult solve_from_values(const GeneratorSpec& gen, const SpaceGrid& space, std::vector<double> terminal,
                                     double t_lo, double t_hi, std::size_t steps, BoundaryMode boundary) {
    if (gen.dim_z != 1) throw PreconditionFailed("the PDE solver supports d = 1 only");
    if (!(t_hi >= t_lo)) throw PreconditionFailed("need t_lo <= t_hi");
    if (terminal.size() != space.count) throw PreconditionFailed("terminal values do not match the grid");
    const double dx = space.step();
    const double dt = steps > 0 ? (t_hi - t_lo) / static_cast<double>(steps) : 0.0;
    if (dt > kStabilityRatio * dx * dx * (1.0 + 1e-12))
        throw StabilityViolation("dt = " + std::to_string(dt) + " exceeds 0.9 dx^2 = " +
                                 std::to_string(kStabilityRatio * dx * dx));

    SolveResult r;
    r.time = TimeGrid{t_lo, t_hi, steps + 1};
    r.space = space;
    r.diagnostics.dt = dt;
    r.diagnostics.dx = dx;
    r.diagnostics.boundary = boundary;
    const std::size_t nx = space.count;
    r.surface.assign((steps + 1) * nx, 0.0);
    std::copy(terminal.begin(), terminal.end(), r.surface.begin() + static_cast<std::ptrdiff_t>(steps * nx));

    const double inv_dx2 = 1.0 / (dx * dx);
    const double inv_2dx = 1.0 / (2.0 * dx);
    std::vector<double> u = std::move(terminal), next(nx);
    for (std::size_t n = steps; n-- > 0;) {
        const double t_next = r.time[n + 1];
        for (std::size_t j = 1; j + 1 < nx; ++j) {
            const double uxx = (u[j + 1] - 2.0 * u[j] + u[j - 1]) * inv_dx2;
            const double ux = (u[j + 1] - u[j - 1]) * inv_2dx;
            next[j] = u[j] + dt * (0.5 * uxx + gen(t_next, u[j], ux));
        }
        detail::apply_boundary(next, boundary);
        for (std::size_t j = 0; j < nx; ++j)
            if (!std::isfinite(next[j]))
                throw NonFiniteSolution("non-finite value at t = " + std::to_string(r.time[n]));
        std::copy(next.begin(), next.end(), r.surface.begin() + static_cast<std::ptrdiff_t>(n * nx));
        std::swap(u, next);
    }
    return r;
}

/// Full solve on [0, T]. With `boundary_probe` the solve is repeated with the
/// other boundary closure; a difference above `probe_tolerance` at x0 means the
/// boundary reaches the evaluation point (DomainTooSmall).
inline SolveResult solve_pde(const GeneratorSpec& gen, const PayoffSpec& payoff, double T,
                             const PdeConfig& cfg = PdeConfig{}) {
    if (!(T > 0)) throw PreconditionFailed("horizon T must be positive");
    const SpaceGrid space = default_space_grid(gen, T, cfg);
    if (!space.contains(cfg.x0)) throw PreconditionFailed("x0 outside the spatial domain");
    payoff.verify_growth(space);
    std::vector<double> terminal(space.count);
    for (std::size_t j = 0; j < space.count; ++j) terminal[j] = payoff(space[j]);

    const std::size_t steps = time_steps_for(T, space.step(), cfg);
    SolveResult r = solve_from_values(gen, space, terminal, 0.0, T, steps, cfg.boundary);
    r.x0 = cfg.x0;
    r.y0 = r.value(0.0, cfg.x0);

    if (cfg.boundary_probe) {
        const auto other = cfg.boundary == BoundaryMode::affine_extrapolation ? BoundaryMode::zero_gradient
                                                                              : BoundaryMode::affine_extrapolation;
        SolveResult probe = solve_from_values(gen, space, terminal, 0.0, T, steps, other);
        r.diagnostics.probed = true;
        r.diagnostics.probe_delta = std::fabs(probe.value(0.0, cfg.x0) - r.y0);
        if (r.diagnostics.probe_delta > cfg.probe_tolerance)
            throw DomainTooSmall("boundary closure changes u(0, x0) by " + std::to_string(r.diagnostics.probe_delta));
    }
    return r;
}

/// E^g_{t,T}[phi(W_T)] evaluated at W_t = x.
inline double g_expectation(const GeneratorSpec& gen, const PayoffSpec& payoff, double t, double T, double x,
                            PdeConfig cfg = PdeConfig{}) {
    if (!(t >= 0 && t <= T)) throw PreconditionFailed("need 0 <= t <= T");
    if (t == T) return payoff(x);
    cfg.x0 = x;
    return solve_pde(gen, payoff, T, cfg).value(t, x);
}

/// Values of `src` (on `from`) read at every node of `to`.
inline std::vector<double> interpolate_onto(const SpaceGrid& from, std::span<const double> src, const SpaceGrid& to) {
    std::vector<double> out(to.count);
    for (std::size_t j = 0; j < to.count; ++j)
        if (!interpolate(from, src.data(), to[j], out[j]))
            throw InterpolationOutOfRange("node x = " + std::to_string(to[j]) + " outside the source grid");
    return out;
}

/// Stage-by-stage solve through intermediate times.
struct ChainResult {
    std::vector<double> times;  // ascending: 0, t_1, ..., T
    std::vector<SolveResult> stages;  // stages[k] covers [times[k], times[k+1]]
    double y0 = 0.0;

    /// Surface row at times[k].
    std::span<const double> surface_at(std::size_t k) const {
        if (k == stages.size()) return stages.back().row(stages.back().time.count - 1);
        return stages[k].row(0);
    }
};

/// Chained solve: E^g_{0,t1}[ E^g_{t1,t2}[ ... E^g_{tk,T}[phi] ] ]. Every stage
/// runs on the grid of the direct [0, T] solve; each stage's terminal data is
/// the previous stage's surface interpolated onto that grid.
inline ChainResult conditional_g_expectation_path(const GeneratorSpec& gen, const PayoffSpec& payoff, double T,
                                                  std::vector<double> intermediate, const PdeConfig& cfg = PdeConfig{}) {
    if (!std::is_sorted(intermediate.begin(), intermediate.end()))
        throw PreconditionFailed("intermediate times must be sorted");
    for (double s : intermediate)
        if (!(s > 0 && s < T)) throw PreconditionFailed("intermediate times must lie in (0, T)");

    const SpaceGrid space = default_space_grid(gen, T, cfg);
    payoff.verify_growth(space);
    ChainResult out;
    out.times.push_back(0.0);
    out.times.insert(out.times.end(), intermediate.begin(), intermediate.end());
    out.times.push_back(T);
    out.stages.resize(out.times.size() - 1);

    std::vector<double> terminal(space.count);
    for (std::size_t j = 0; j < space.count; ++j) terminal[j] = payoff(space[j]);
    SpaceGrid from = space;
    for (std::size_t k = out.stages.size(); k-- > 0;) {
        const double lo = out.times[k], hi = out.times[k + 1];
        auto data = interpolate_onto(from, terminal, space);
        out.stages[k] =
            solve_from_values(gen, space, std::move(data), lo, hi, time_steps_for(hi - lo, space.step(), cfg), cfg.boundary);
        out.stages[k].x0 = cfg.x0;
        out.stages[k].y0 = out.stages[k].value(lo, cfg.x0);
        auto r0 = out.stages[k].row(0);
        terminal.assign(r0.begin(), r0.end());
        from = out.stages[k].space;
    }
    out.y0 = out.stages.front().y0;
    return out;
}

inline std::string format_sig(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

/// CSV dump "t,x,u,z", time-major, 17 significant digits. With a stride
/// above 1 only every stride-th time level is written, plus t = 0 and T.
inline void write_surface_csv(const SolveResult& r, std::ostream& os, std::size_t stride = 1) {
    if (stride == 0) stride = 1;
    os << "t,x,u,z\n";
    const std::size_t last = r.time.count - 1;
    for (std::size_t n = 0; n < r.time.count; ++n) {
        if (n % stride != 0 && n != last) continue;
        for (std::size_t j = 0; j < r.space.count; ++j)
            os << format_sig(r.time[n], 17) << ',' << format_sig(r.space[j], 17) << ',' << format_sig(r.at(n, j), 17)
               << ',' << format_sig(r.z_at(n, j), 17) << '\n';
    }
}

} // namespace gconvex
