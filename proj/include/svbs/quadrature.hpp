#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "svbs/errors.hpp"

namespace svbs {

/// Composite trapezoid rule on an arbitrary increasing node set.
inline double trapezoid(std::span<const double> x, std::span<const double> f) {
    if (x.size() != f.size()) throw DimensionError("trapezoid: node/value size mismatch");
    double sum = 0.0;
    for (std::size_t k = 1; k < x.size(); ++k) sum += 0.5 * (x[k] - x[k - 1]) * (f[k] + f[k - 1]);
    return sum;
}

/// Uniform cell-centred grid on [0,1].
struct SimGrid {
    int Nx = 400;

    explicit SimGrid(int cells = 400) : Nx(cells) {
        if (cells < 16) throw DomainError("SimGrid: Nx must be >= 16");
    }

    double dx() const { return 1.0 / Nx; }
    double center(int j) const { return (j + 0.5) / Nx; }

    /// Nodes {0, x_0, ..., x_{Nx-1}, 1} used by the boundary-extended trapezoid rule.
    std::vector<double> extended_nodes() const {
        std::vector<double> nodes(static_cast<std::size_t>(Nx) + 2);
        nodes.front() = 0.0;
        for (int j = 0; j < Nx; ++j) nodes[static_cast<std::size_t>(j) + 1] = center(j);
        nodes.back() = 1.0;
        return nodes;
    }
};

/// Cell values extended to the domain ends by nearest-cell extrapolation.
inline std::vector<double> extend_nearest(std::span<const double> cells) {
    std::vector<double> ext(cells.size() + 2);
    ext.front() = cells.front();
    for (std::size_t j = 0; j < cells.size(); ++j) ext[j + 1] = cells[j];
    ext.back() = cells.back();
    return ext;
}

/// Trapezoid over [0,1] of cell data with nearest-cell end values.
/// Algebraically this collapses to the midpoint rule sum(f_j) * dx.
inline double integrate_cells(std::span<const double> cells) {
    double sum = 0.0;
    for (double f : cells) sum += f;
    return sum / static_cast<double>(cells.size());
}

}  // namespace svbs
