#pragma once

// Least-squares Monte Carlo for the scalar BSDE
//
//     Y_i = E[Y_{i+1} | F_i] + g(t_i, Y_i, Z_i) dt,
//     Z_i = E[Y_{i+1} dW_i | F_i] / dt,
//
// conditional expectations by polynomial regression on W_{t_i}, the implicit
// Y_i by a fixed number of Picard sweeps. Each path draws from its own
// stream seeded by (seed, path), so results do not depend on evaluation order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "gconvex/driver.hpp"
#include "gconvex/errors.hpp"
#include "gconvex/pde_solver.hpp"

namespace gconvex {

/// monomial: 1, x, ..., x^degree. hat: continuous piecewise-linear
/// functions on `knots` standard-normal quantiles plus x^2, ..., x^degree
/// for the tails; resolves kinks that a low-degree polynomial smears out.
enum class McBasis { monomial, hat };

struct McConfig {
    std::size_t paths = 10000;
    std::size_t steps = 100;
    McBasis basis = McBasis::hat;
    std::size_t basis_degree = 4;
    std::size_t knots = 16;
    std::uint64_t seed = 42;
    std::size_t bootstrap = 16;  // replicates for the standard error
    std::size_t picard = 5;
    double ridge = 1e-10;
    double x0 = 0.0;
};

struct McDiagnostics {
    double dt = 0.0;
    std::size_t picard_iters = 0;
    double max_condition = 0.0;  // worst normal-matrix condition number seen
    std::size_t regressions = 0;
};

struct McResult {
    double y0 = 0.0;
    double std_error = 0.0;
    McDiagnostics diagnostics;
};

/// Terminal functional of the whole path (W_{t_0}, ..., W_{t_N}).
using PathFunctional = std::function<double(std::span<const double>)>;

/// Separates the regression by an F_{t_k}-measurable label for all steps
/// k >= from_step; used for data of the form sum_i 1_{A_i} X_i.
struct RegimeSplit {
    std::size_t from_step = 0;
    std::function<int(std::span<const double>)> label;
};

namespace detail {

inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    return std::mt19937_64(seq);
}

struct PathStore {
    std::size_t paths = 0, nodes = 0;
    std::vector<double> w;  // row per path
    std::span<const double> path(std::size_t p) const { return {w.data() + p * nodes, nodes}; }
    double at(std::size_t p, std::size_t i) const { return w[p * nodes + i]; }
};

inline PathStore simulate(const McConfig& cfg, double dt) {
    PathStore s;
    s.paths = cfg.paths;
    s.nodes = cfg.steps + 1;
    s.w.resize(s.paths * s.nodes);
    const double sq = std::sqrt(dt);
    for (std::size_t p = 0; p < s.paths; ++p) {
        auto rng = stream(cfg.seed, p + 1);
        boost::random::normal_distribution<double> normal;
        double* row = s.w.data() + p * s.nodes;
        row[0] = cfg.x0;
        for (std::size_t i = 1; i < s.nodes; ++i) row[i] = row[i - 1] + sq * normal(rng);
    }
    return s;
}

class Backward {
public:
    Backward(const GeneratorSpec& gen, const PathStore& w, const std::vector<double>& terminal,
             const std::vector<int>& labels, std::size_t split_from, const McConfig& cfg, double dt)
        : gen_(gen), w_(w), terminal_(terminal), labels_(labels), split_from_(split_from), cfg_(cfg), dt_(dt),
          knots_(make_knots(cfg)) {}

    double run(std::span<const std::uint32_t> ids, McDiagnostics& diag) const {
        const std::size_t n = ids.size();
        Eigen::VectorXd y(n), ey(n), z(n), dw(n);
        for (std::size_t k = 0; k < n; ++k) y[k] = terminal_[ids[k]];

        for (std::size_t i = cfg_.steps; i-- > 1;) {
            const double t = dt_ * static_cast<double>(i);
            for (std::size_t k = 0; k < n; ++k) dw[k] = w_.at(ids[k], i + 1) - w_.at(ids[k], i);
            const bool split = !labels_.empty() && i >= split_from_;
            if (split) {
                std::vector<std::vector<std::size_t>> groups;
                std::vector<int> keys;
                for (std::size_t k = 0; k < n; ++k) {
                    const int lab = labels_[ids[k]];
                    auto it = std::find(keys.begin(), keys.end(), lab);
                    if (it == keys.end()) {
                        keys.push_back(lab);
                        groups.emplace_back();
                        it = keys.end() - 1;
                    }
                    groups[static_cast<std::size_t>(it - keys.begin())].push_back(k);
                }
                for (const auto& rows : groups) fit_group(ids, rows, i, t, y, dw, ey, z, diag);
            } else {
                std::vector<std::size_t> rows(n);
                for (std::size_t k = 0; k < n; ++k) rows[k] = k;
                fit_group(ids, rows, i, t, y, dw, ey, z, diag);
            }
            for (std::size_t k = 0; k < n; ++k) y[k] = picard(t, ey[k], z[k], diag);
        }

        // t = 0: W_0 is deterministic, conditional expectation is the mean
        const double m = y.mean();
        double zs = 0.0;
        for (std::size_t k = 0; k < n; ++k) zs += (y[k] - m) * (w_.at(ids[k], 1) - w_.at(ids[k], 0));
        const double z0 = zs / (static_cast<double>(n) * dt_);
        return picard(0.0, m, z0, diag);
    }

private:
    std::size_t basis_size() const {
        return cfg_.basis == McBasis::hat ? knots_.size() + cfg_.basis_degree - 1 : cfg_.basis_degree + 1;
    }

    void fill_row(Eigen::MatrixXd& X, Eigen::Index r, double x) const {
        if (cfg_.basis == McBasis::monomial) {
            double p = 1.0;
            for (Eigen::Index c = 0; c < X.cols(); ++c, p *= x) X(r, c) = p;
            return;
        }
        // hats on the knots; the end hats extend linearly beyond the range
        const auto n = knots_.size();
        std::size_t k = std::upper_bound(knots_.begin(), knots_.end(), x) - knots_.begin();
        k = std::clamp<std::size_t>(k, 1, n - 1);
        const double w = (x - knots_[k - 1]) / (knots_[k] - knots_[k - 1]);
        X(r, static_cast<Eigen::Index>(k - 1)) = 1.0 - w;
        X(r, static_cast<Eigen::Index>(k)) = w;
        double p = x;
        for (auto c = static_cast<Eigen::Index>(n); c < X.cols(); ++c) X(r, c) = (p *= x);
    }

    static std::vector<double> make_knots(const McConfig& cfg) {
        if (cfg.basis != McBasis::hat) return {};
        const boost::math::normal_distribution<double> nd;
        std::vector<double> k(cfg.knots);
        for (std::size_t j = 0; j < cfg.knots; ++j)
            k[j] = boost::math::quantile(nd, (static_cast<double>(j) + 0.5) / static_cast<double>(cfg.knots));
        return k;
    }

    double picard(double t, double ey, double z, McDiagnostics& diag) const {
        double v = ey;
        // without y-dependence every sweep returns the same value
        const std::size_t sweeps = gen_.flags.independent_of_y ? std::min<std::size_t>(cfg_.picard, 1) : cfg_.picard;
        for (std::size_t it = 0; it < sweeps; ++it) v = ey + dt_ * gen_(t, v, z);
        diag.picard_iters = cfg_.picard;
        return v;
    }

    void fit_group(std::span<const std::uint32_t> ids, const std::vector<std::size_t>& rows, std::size_t i, double t,
                   const Eigen::VectorXd& y, const Eigen::VectorXd& dw, Eigen::VectorXd& ey, Eigen::VectorXd& z,
                   McDiagnostics& diag) const {
        const auto nb = static_cast<Eigen::Index>(basis_size());
        const auto m = static_cast<Eigen::Index>(rows.size());
        if (m < nb) throw RegressionSingular("regression group smaller than the basis");
        const double scale = 1.0 / std::sqrt(t);
        Eigen::MatrixXd X = Eigen::MatrixXd::Zero(m, nb);
        Eigen::MatrixXd rhs(m, 2);
        for (Eigen::Index r = 0; r < m; ++r) {
            const std::size_t k = rows[static_cast<std::size_t>(r)];
            fill_row(X, r, (w_.at(ids[k], i) - cfg_.x0) * scale);
            rhs(r, 0) = y[static_cast<Eigen::Index>(k)];
        }
        // a hat seen by only a handful of samples is not identifiable (two
        // tail hats sharing one sample are proportional); drop it
        if (cfg_.basis == McBasis::hat) {
            constexpr Eigen::Index min_support = 10;
            std::vector<Eigen::Index> keep;
            const auto hats = static_cast<Eigen::Index>(knots_.size());
            for (Eigen::Index c = 0; c < nb; ++c)
                if (c >= hats || (X.col(c).array() != 0.0).count() >= min_support) keep.push_back(c);
            if (static_cast<Eigen::Index>(keep.size()) < nb) {
                Eigen::MatrixXd Xa(m, static_cast<Eigen::Index>(keep.size()));
                for (std::size_t c = 0; c < keep.size(); ++c) Xa.col(static_cast<Eigen::Index>(c)) = X.col(keep[c]);
                X = std::move(Xa);
            }
        }
        const Eigen::Index na = X.cols();
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(na, na);
        A.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose(), 1.0 / static_cast<double>(m));
        A.triangularView<Eigen::StrictlyUpper>() = A.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A, Eigen::EigenvaluesOnly);
        const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
        const double cond = lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
        diag.max_condition = std::max(diag.max_condition, cond);
        if (cond > 1e12)
            throw RegressionSingular("normal matrix condition number " + std::to_string(cond) +
                                     " exceeds 1e12; raise paths or shrink the basis");
        A.diagonal().array() += cfg_.ridge;
        Eigen::LDLT<Eigen::MatrixXd> solver(A);

        Eigen::VectorXd beta = solver.solve(X.transpose() * rhs.col(0) / static_cast<double>(m));
        Eigen::VectorXd fit = X * beta;
        // Control variate: regress (Y - E[Y]) dW instead of Y dW.
        for (Eigen::Index r = 0; r < m; ++r) {
            const auto k = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]);
            rhs(r, 1) = (y[k] - fit[r]) * dw[k] / dt_;
        }
        Eigen::VectorXd gamma = solver.solve(X.transpose() * rhs.col(1) / static_cast<double>(m));
        Eigen::VectorXd zfit = X * gamma;
        for (Eigen::Index r = 0; r < m; ++r) {
            const auto k = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]);
            ey[k] = fit[r];
            z[k] = zfit[r];
        }
        diag.regressions += 2;
    }

    const GeneratorSpec& gen_;
    const PathStore& w_;
    const std::vector<double>& terminal_;
    const std::vector<int>& labels_;
    std::size_t split_from_;
    const McConfig& cfg_;
    double dt_;
    std::vector<double> knots_;
};

} // namespace detail

/// Y_0 for a general path functional, with a bootstrap standard error from
/// `cfg.bootstrap` path resamples.
inline McResult solve_mc_functional(const GeneratorSpec& gen, const PathFunctional& terminal, double T,
                                    const McConfig& cfg = McConfig{}, const std::optional<RegimeSplit>& split = {}) {
    if (gen.dim_z != 1) throw PreconditionFailed("the MC solver supports d = 1 only");
    if (cfg.paths < 1000) throw PreconditionFailed("need paths >= 1000");
    if (cfg.steps < 10) throw PreconditionFailed("need steps >= 10");
    if (cfg.basis_degree < 2) throw PreconditionFailed("need basis_degree >= 2");
    if (cfg.basis == McBasis::hat && cfg.knots < 3) throw PreconditionFailed("need knots >= 3");
    if (!(T > 0)) throw PreconditionFailed("horizon T must be positive");
    const double dt = T / static_cast<double>(cfg.steps);
    if (gen.mu_hat * dt >= 1.0)
        throw PicardDivergence("mu_hat * dt = " + std::to_string(gen.mu_hat * dt) + " >= 1");

    const auto paths = detail::simulate(cfg, dt);
    std::vector<double> term(cfg.paths);
    for (std::size_t p = 0; p < cfg.paths; ++p) {
        term[p] = terminal(paths.path(p));
        if (!std::isfinite(term[p])) throw NonFiniteSolution("terminal functional is not finite on a path");
    }
    std::vector<int> labels;
    std::size_t split_from = 0;
    if (split) {
        if (split->from_step < 1 || split->from_step > cfg.steps) throw PreconditionFailed("split step out of range");
        split_from = split->from_step;
        labels.resize(cfg.paths);
        for (std::size_t p = 0; p < cfg.paths; ++p) labels[p] = split->label(paths.path(p).first(split_from + 1));
    }

    detail::Backward backward(gen, paths, term, labels, split_from, cfg, dt);
    McResult out;
    out.diagnostics.dt = dt;
    std::vector<std::uint32_t> ids(cfg.paths);
    for (std::size_t p = 0; p < cfg.paths; ++p) ids[p] = static_cast<std::uint32_t>(p);
    out.y0 = backward.run(ids, out.diagnostics);

    if (cfg.bootstrap >= 2) {
        std::vector<double> reps(cfg.bootstrap);
        for (std::size_t b = 0; b < cfg.bootstrap; ++b) {
            auto rng = detail::stream(cfg.seed, 0, b + 1);
            boost::random::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(cfg.paths - 1));
            for (auto& id : ids) id = pick(rng);
            reps[b] = backward.run(ids, out.diagnostics);
        }
        double mean = 0.0;
        for (double v : reps) mean += v;
        mean /= static_cast<double>(reps.size());
        double ss = 0.0;
        for (double v : reps) ss += (v - mean) * (v - mean);
        out.std_error = std::sqrt(ss / static_cast<double>(reps.size() - 1));
    }
    return out;
}

/// Markovian data phi(W_T).
inline McResult solve_mc(const GeneratorSpec& gen, const PayoffSpec& payoff, double T,
                         const McConfig& cfg = McConfig{}) {
    return solve_mc_functional(
        gen, [&payoff](std::span<const double> w) { return payoff(w.back()); }, T, cfg);
}

} // namespace gconvex
