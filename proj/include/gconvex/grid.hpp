#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace gconvex {

/// Uniform node i of n on [lo, hi]. Multiplies before dividing so that nodes
/// that are exactly representable (0, 1, ...) come out exact.
inline double grid_node(double lo, double hi, std::size_t i, std::size_t n) {
    if (n < 2) return lo;
    if (i + 1 == n) return hi;
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = grid_node(lo, hi, i, n);
    return v;
}

/// Uniform partition of [lo, hi] into `count` nodes.
struct UniformGrid {
    double lo = 0.0;
    double hi = 1.0;
    std::size_t count = 2;

    double step() const { return (hi - lo) / static_cast<double>(count - 1); }
    double operator[](std::size_t i) const { return grid_node(lo, hi, i, count); }
    std::vector<double> nodes() const { return linspace(lo, hi, count); }
    bool contains(double x) const { return x >= lo && x <= hi; }
};

using TimeGrid = UniformGrid;
using SpaceGrid = UniformGrid;

/// Piecewise-linear interpolation of `values` tabulated on `grid`.
/// Returns false when `x` lies outside the grid.
inline bool interpolate(const UniformGrid& grid, const double* values, double x, double& out) {
    if (!(x >= grid.lo && x <= grid.hi)) return false;
    const double h = grid.step();
    double pos = (x - grid.lo) / h;
    const double nearest = std::round(pos);
    if (std::fabs(pos - nearest) < 1e-9) pos = nearest;  // land exactly on nodes
    std::size_t j = static_cast<std::size_t>(std::floor(pos));
    if (j >= grid.count - 1) j = grid.count - 2;
    const double w = pos - static_cast<double>(j);
    if (w == 0.0) {
        out = values[j];
    } else if (w == 1.0) {
        out = values[j + 1];
    } else {
        out = (1.0 - w) * values[j] + w * values[j + 1];
    }
    return true;
}

} // namespace gconvex
