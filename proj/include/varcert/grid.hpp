#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "varcert/errors.hpp"

namespace varcert {

/// Uniform cell-centered grid on the unit interval/square.
///
/// Nodes are cell midpoints: x_i = (i + 1/2) h with h = 1/n per axis, so the
/// quadrature weight of every node is exactly h^dim and the weights sum to 1.
/// 2-D nodes are stored row-major: index = iy * n + ix.
class Grid {
public:
    Grid(int dim, int n_per_axis) : dim_(dim), n_(n_per_axis) {
        if (dim != 1 && dim != 2)
            throw config_error("grid.dim", "grid dim must be 1 or 2, got " + std::to_string(dim));
        if (n_per_axis < 2)
            throw config_error("grid.n", "grid n must be >= 2, got " + std::to_string(n_per_axis));
    }

    int dim() const noexcept { return dim_; }
    int n_per_axis() const noexcept { return n_; }
    double h() const noexcept { return 1.0 / static_cast<double>(n_); }

    std::size_t node_count() const noexcept {
        std::size_t n = static_cast<std::size_t>(n_);
        return dim_ == 1 ? n : n * n;
    }

    /// Quadrature weight of one node, h^dim.
    double cell_volume() const noexcept {
        return dim_ == 1 ? h() : h() * h();
    }

    /// Coordinates of node i (y coordinate is 0 in 1-D).
    struct Point { double x, y; };
    Point node(std::size_t i) const {
        if (dim_ == 1) return {(static_cast<double>(i) + 0.5) * h(), 0.0};
        const std::size_t ix = i % static_cast<std::size_t>(n_);
        const std::size_t iy = i / static_cast<std::size_t>(n_);
        return {(static_cast<double>(ix) + 0.5) * h(), (static_cast<double>(iy) + 0.5) * h()};
    }

    bool operator==(const Grid& o) const noexcept { return dim_ == o.dim_ && n_ == o.n_; }
    bool operator!=(const Grid& o) const noexcept { return !(*this == o); }

private:
    int dim_;
    int n_;
};

/// A function on the nodes of a Grid, with the quadrature inner product
///   (u, v) = h^dim * sum_i u_i v_i,
/// so that constants have norm |c| and grids of different resolution are
/// comparable.
class GridFunction {
public:
    GridFunction() : grid_(1, 2), values_(2, 0.0) {}
    explicit GridFunction(const Grid& g, double fill = 0.0)
        : grid_(g), values_(g.node_count(), fill) {}
    GridFunction(const Grid& g, std::vector<double> values)
        : grid_(g), values_(std::move(values)) {
        if (values_.size() != g.node_count())
            throw io_error("grid function length " + std::to_string(values_.size()) +
                           " does not match node count " + std::to_string(g.node_count()));
    }

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    std::vector<double>& values() noexcept { return values_; }
    const std::vector<double>& values() const noexcept { return values_; }

    bool all_finite() const noexcept {
        for (double v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    Grid grid_;
    std::vector<double> values_;
};

inline void require_same_grid(const GridFunction& a, const GridFunction& b) {
    if (a.grid() != b.grid())
        throw numeric_error("grid mismatch between operands");
}

/// Quadrature inner product h^dim * sum_i a_i b_i.
inline double inner(const GridFunction& a, const GridFunction& b) {
    require_same_grid(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return a.grid().cell_volume() * s;
}

inline double norm(const GridFunction& a) { return std::sqrt(inner(a, a)); }

/// c1*a + c2*b on a shared grid.
inline GridFunction lincomb(double c1, const GridFunction& a, double c2, const GridFunction& b) {
    require_same_grid(a, b);
    GridFunction r(a.grid());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = c1 * a[i] + c2 * b[i];
    return r;
}

inline GridFunction scaled(double c, const GridFunction& a) {
    GridFunction r(a.grid());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = c * a[i];
    return r;
}

} // namespace varcert
