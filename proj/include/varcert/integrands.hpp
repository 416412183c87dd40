#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "varcert/errors.hpp"
#include "varcert/sets.hpp"

namespace varcert {

/// Description of one pointwise convex integrand f_i(t). The four supported
/// shapes cover quadratic penalties, box indicators, weighted absolute
/// values, and Moreau-Yosida regularizations of the latter two.
///
/// Parameters may be spatially varying (per-node vectors); empty vectors mean
/// "use the constant".
struct IntegrandSpec {
    enum class Kind { SquaredTwoNorm, IndicatorInterval, WeightedAbs, MoreauYosida };

    Kind kind = Kind::SquaredTwoNorm;
    Kind base_kind = Kind::IndicatorInterval; // Moreau-Yosida only
    double gamma = 0.0;                       // Moreau-Yosida weight
    double weight = 1.0;                      // quadratic alpha / abs delta
    double lo = -1.0, hi = 1.0;               // interval bounds
    std::vector<double> weight_field;
    std::vector<double> lo_field, hi_field;

    static IntegrandSpec squared_two_norm(double alpha) {
        IntegrandSpec s;
        s.kind = Kind::SquaredTwoNorm;
        s.weight = alpha;
        if (!(alpha > 0)) throw config_error("integrand.weight", "quadratic weight must be > 0");
        return s;
    }

    static IntegrandSpec indicator_interval(double lo, double hi) {
        IntegrandSpec s;
        s.kind = Kind::IndicatorInterval;
        s.lo = lo;
        s.hi = hi;
        if (!(lo < hi)) throw config_error("integrand.bounds", "interval needs lo < hi");
        return s;
    }

    static IntegrandSpec indicator_interval(std::vector<double> lo, std::vector<double> hi) {
        IntegrandSpec s;
        s.kind = Kind::IndicatorInterval;
        if (lo.size() != hi.size())
            throw config_error("integrand.bounds", "bound fields must have equal length");
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (!(lo[i] < hi[i]))
                throw config_error("integrand.bounds",
                                   "interval needs lo < hi at node " + std::to_string(i));
        s.lo_field = std::move(lo);
        s.hi_field = std::move(hi);
        return s;
    }

    static IntegrandSpec weighted_abs(double delta) {
        IntegrandSpec s;
        s.kind = Kind::WeightedAbs;
        s.weight = delta;
        if (!(delta > 0)) throw config_error("integrand.weight", "abs weight must be > 0");
        return s;
    }

    static IntegrandSpec weighted_abs(std::vector<double> delta) {
        IntegrandSpec s;
        s.kind = Kind::WeightedAbs;
        for (std::size_t i = 0; i < delta.size(); ++i)
            if (!(delta[i] > 0))
                throw config_error("integrand.weight",
                                   "abs weight must be > 0 at node " + std::to_string(i));
        s.weight_field = std::move(delta);
        return s;
    }

    static IntegrandSpec moreau_yosida(const IntegrandSpec& base, double gamma) {
        if (base.kind != Kind::IndicatorInterval && base.kind != Kind::WeightedAbs)
            throw config_error("integrand.base",
                               "Moreau-Yosida base must be IndicatorInterval or WeightedAbs");
        if (!(gamma > 0)) throw config_error("integrand.gamma", "Moreau-Yosida gamma must be > 0");
        IntegrandSpec s = base;
        s.kind = Kind::MoreauYosida;
        s.base_kind = base.kind;
        s.gamma = gamma;
        return s;
    }

    /// The integrand with the Moreau-Yosida wrapper stripped (identity for
    /// non-wrapped kinds).
    IntegrandSpec base() const {
        IntegrandSpec s = *this;
        if (kind == Kind::MoreauYosida) {
            s.kind = base_kind;
            s.gamma = 0.0;
        }
        return s;
    }

    double weight_at(std::size_t i) const {
        return weight_field.empty() ? weight : weight_field.at(i);
    }
    double lo_at(std::size_t i) const { return lo_field.empty() ? lo : lo_field.at(i); }
    double hi_at(std::size_t i) const { return hi_field.empty() ? hi : hi_field.at(i); }

    const char* kind_name() const {
        switch (kind) {
            case Kind::SquaredTwoNorm: return "SquaredTwoNorm";
            case Kind::IndicatorInterval: return "IndicatorInterval";
            case Kind::WeightedAbs: return "WeightedAbs";
            case Kind::MoreauYosida: return "MoreauYosida";
        }
        return "?";
    }
};

/// Default absolute tolerance for classifying a point onto a case boundary
/// (|z| = bound, zeta = 0, ...). Exposed as a parameter on every case
/// evaluation.
constexpr double kTolFeas = 1e-9;

/// Pointwise subdifferential of the integrand at z (node i selects spatially
/// varying parameters).
inline SetDescriptor1D subdiff(const IntegrandSpec& f, double z, std::size_t i = 0,
                               double tol = kTolFeas) {
    using K = IntegrandSpec::Kind;
    switch (f.kind) {
        case K::SquaredTwoNorm:
            return SetDescriptor1D::single_point(f.weight_at(i) * z);
        case K::IndicatorInterval: {
            const double lo = f.lo_at(i), hi = f.hi_at(i);
            if (z < lo - tol || z > hi + tol) return SetDescriptor1D::empty();
            const bool at_hi = std::abs(z - hi) <= tol;
            const bool at_lo = std::abs(z - lo) <= tol;
            if (at_hi) return SetDescriptor1D::affine_cone(0.0, ConeKind1D::HalfLineNonneg);
            if (at_lo) return SetDescriptor1D::affine_cone(0.0, ConeKind1D::HalfLineNonpos);
            return SetDescriptor1D::single_point(0.0);
        }
        case K::WeightedAbs: {
            const double d = f.weight_at(i);
            if (z > tol) return SetDescriptor1D::single_point(d);
            if (z < -tol) return SetDescriptor1D::single_point(-d);
            return SetDescriptor1D::interval(-d, d);
        }
        case K::MoreauYosida:
            // d(f_base + gamma/2 |.|^2) = d f_base + gamma * z.
            return subdiff(f.base(), z, i, tol).shifted(f.gamma * z);
    }
    return SetDescriptor1D::empty();
}

namespace detail {

/// Graph derivative of the box-indicator subdifferential at a boundary point,
/// where s = +1 at the upper bound and -1 at the lower bound (the outward
/// direction).
inline SetDescriptor1D indicator_boundary_cases(double s, double zeta, double dz, double tol,
                                                bool convexified) {
    const double zr = zeta * s; // radial subgradient component, >= 0 on the graph
    if (zr < -tol) return SetDescriptor1D::empty(); // (z, zeta) off the graph
    if (zr > tol) {
        // Strictly active multiplier: derivative exists only tangentially.
        return std::abs(dz) <= tol ? SetDescriptor1D::full_line() : SetDescriptor1D::empty();
    }
    // zeta == 0 at the boundary.
    if (convexified) {
        if (s * dz <= tol) return SetDescriptor1D::affine_cone(0.0, halfline_from_sign(s));
        return SetDescriptor1D::empty();
    }
    if (std::abs(dz) <= tol) return SetDescriptor1D::affine_cone(0.0, halfline_from_sign(s));
    if (s * dz < -tol) return SetDescriptor1D::single_point(0.0);
    return SetDescriptor1D::empty();
}

/// Graph derivative of the weighted-abs subdifferential (the conjugate-side
/// map for max-norm data fitting). delta is the node weight.
inline SetDescriptor1D abs_cases(double delta, double z, double zeta, double dz, double tol,
                                 bool convexified) {
    if (std::abs(z) > tol) {
        // Away from the kink the map is locally constant {±delta}; the plain
        // and convexified derivatives agree there.
        const double want = z > 0 ? delta : -delta;
        if (std::abs(zeta - want) <= tol) return SetDescriptor1D::single_point(0.0);
        return SetDescriptor1D::empty();
    }
    // z == 0: zeta must lie in [-delta, delta].
    const double a = std::abs(zeta);
    if (a > delta + tol) return SetDescriptor1D::empty();
    if (std::abs(a - delta) <= tol) {
        // Boundary multiplier: the graph turns the corner here.
        const double sgn = zeta >= 0 ? 1.0 : -1.0;
        if (convexified) {
            if (sgn * dz >= -tol)
                return SetDescriptor1D::affine_cone(0.0, halfline_from_sign(-sgn));
            return SetDescriptor1D::empty();
        }
        if (sgn * dz > tol) return SetDescriptor1D::single_point(0.0);
        if (std::abs(dz) <= tol)
            return SetDescriptor1D::affine_cone(0.0, halfline_from_sign(-sgn));
        return SetDescriptor1D::empty();
    }
    // Interior multiplier |zeta| < delta: z is pinned at 0.
    if (std::abs(dz) <= tol) return SetDescriptor1D::full_line();
    return SetDescriptor1D::empty();
}

} // namespace detail

/// Graph derivative of the subdifferential map z =>> df(z) at a point
/// (z, zeta) of its graph, in direction dz: the outer limit of the difference
/// quotients (df(z + t dz~) - zeta)/t. Returns Empty when (z, zeta) is not on
/// the graph or the direction is inadmissible.
inline SetDescriptor1D graph_derivative(const IntegrandSpec& f, double z, double zeta, double dz,
                                        std::size_t i = 0, double tol = kTolFeas) {
    using K = IntegrandSpec::Kind;
    switch (f.kind) {
        case K::SquaredTwoNorm: {
            const double a = f.weight_at(i);
            if (std::abs(zeta - a * z) > tol) return SetDescriptor1D::empty();
            return SetDescriptor1D::single_point(a * dz);
        }
        case K::IndicatorInterval: {
            const double lo = f.lo_at(i), hi = f.hi_at(i);
            if (z < lo - tol || z > hi + tol) return SetDescriptor1D::empty();
            if (std::abs(z - hi) <= tol)
                return detail::indicator_boundary_cases(+1.0, zeta, dz, tol, false);
            if (std::abs(z - lo) <= tol)
                return detail::indicator_boundary_cases(-1.0, zeta, dz, tol, false);
            if (std::abs(zeta) <= tol) return SetDescriptor1D::single_point(0.0);
            return SetDescriptor1D::empty();
        }
        case K::WeightedAbs:
            return detail::abs_cases(f.weight_at(i), z, zeta, dz, tol, false);
        case K::MoreauYosida: {
            // The graph of df_base + gamma*I is a sheared copy of the graph
            // of df_base, so the derivative shears the same way.
            const SetDescriptor1D inner =
                graph_derivative(f.base(), z, zeta - f.gamma * z, dz, i, tol);
            return inner.shifted(f.gamma * dz);
        }
    }
    return SetDescriptor1D::empty();
}

/// Convexified (graphically regularized) variant: cases whose union is convex
/// are merged, which is what the coderivative formulas act on.
inline SetDescriptor1D graph_derivative_convexified(const IntegrandSpec& f, double z, double zeta,
                                                    double dz, std::size_t i = 0,
                                                    double tol = kTolFeas) {
    using K = IntegrandSpec::Kind;
    switch (f.kind) {
        case K::SquaredTwoNorm:
            return graph_derivative(f, z, zeta, dz, i, tol); // already convex-valued
        case K::IndicatorInterval: {
            const double lo = f.lo_at(i), hi = f.hi_at(i);
            if (z < lo - tol || z > hi + tol) return SetDescriptor1D::empty();
            if (std::abs(z - hi) <= tol)
                return detail::indicator_boundary_cases(+1.0, zeta, dz, tol, true);
            if (std::abs(z - lo) <= tol)
                return detail::indicator_boundary_cases(-1.0, zeta, dz, tol, true);
            if (std::abs(zeta) <= tol) return SetDescriptor1D::single_point(0.0);
            return SetDescriptor1D::empty();
        }
        case K::WeightedAbs:
            return detail::abs_cases(f.weight_at(i), z, zeta, dz, tol, true);
        case K::MoreauYosida: {
            const SetDescriptor1D inner =
                graph_derivative_convexified(f.base(), z, zeta - f.gamma * z, dz, i, tol);
            return inner.shifted(f.gamma * dz);
        }
    }
    return SetDescriptor1D::empty();
}

/// Scalar proximal map prox_{sigma f}(w) = argmin_t f(t) + (t-w)^2/(2 sigma),
/// in closed form for all four kinds.
inline double prox_scalar(const IntegrandSpec& f, double sigma, double w, std::size_t i = 0) {
    using K = IntegrandSpec::Kind;
    if (!(sigma > 0)) throw numeric_error("prox needs sigma > 0");
    switch (f.kind) {
        case K::SquaredTwoNorm:
            return w / (1.0 + sigma * f.weight_at(i));
        case K::IndicatorInterval:
            return std::clamp(w, f.lo_at(i), f.hi_at(i));
        case K::WeightedAbs: {
            const double d = sigma * f.weight_at(i);
            if (w > d) return w - d;
            if (w < -d) return w + d;
            return 0.0;
        }
        case K::MoreauYosida: {
            // prox of f_base + gamma/2 |.|^2: shrink first, then prox of the
            // base with the rescaled step.
            const double scale = 1.0 + sigma * f.gamma;
            return prox_scalar(f.base(), sigma / scale, w / scale, i);
        }
    }
    return w;
}

/// Integrand value f_i(t) (+inf outside an indicator's interval).
inline double integrand_value(const IntegrandSpec& f, double t, std::size_t i = 0,
                              double tol = kTolFeas) {
    using K = IntegrandSpec::Kind;
    switch (f.kind) {
        case K::SquaredTwoNorm:
            return 0.5 * f.weight_at(i) * t * t;
        case K::IndicatorInterval:
            return (t >= f.lo_at(i) - tol && t <= f.hi_at(i) + tol) ? 0.0 : kInf;
        case K::WeightedAbs:
            return f.weight_at(i) * std::abs(t);
        case K::MoreauYosida: {
            const double b = integrand_value(f.base(), t, i, tol);
            return b + 0.5 * f.gamma * t * t;
        }
    }
    return kInf;
}

/// True when zeta is a subgradient of the integrand at z (within tol).
inline bool feasible_pair(const IntegrandSpec& f, double z, double zeta, std::size_t i = 0,
                          double tol = kTolFeas) {
    return subdiff(f, z, i, tol).contains(zeta, tol);
}

namespace detail {

/// Affine piece a + s*d for s in [s0, s1]; used to project onto graphs of
/// subdifferential maps, which are unions of such pieces for every kind here.
struct GraphPiece {
    double ax, ay, dx, dy, s0, s1;
};

inline void project_onto_piece(const GraphPiece& p, double x, double y, double& best_d2,
                               double& bx, double& by) {
    const double dd = p.dx * p.dx + p.dy * p.dy;
    double s = ((x - p.ax) * p.dx + (y - p.ay) * p.dy) / dd;
    s = std::clamp(s, p.s0, p.s1);
    const double cx = p.ax + s * p.dx, cy = p.ay + s * p.dy;
    const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
    if (d2 < best_d2) {
        best_d2 = d2;
        bx = cx;
        by = cy;
    }
}

inline std::vector<GraphPiece> graph_pieces(const IntegrandSpec& f, std::size_t i) {
    using K = IntegrandSpec::Kind;
    const double big = 1e18; // effectively unbounded ray parameter
    std::vector<GraphPiece> ps;
    const double g = f.kind == K::MoreauYosida ? f.gamma : 0.0;
    switch (f.kind == K::MoreauYosida ? f.base_kind : f.kind) {
        case K::SquaredTwoNorm: {
            ps.push_back({0, 0, 1, f.weight_at(i), -big, big});
            break;
        }
        case K::IndicatorInterval: {
            const double lo = f.lo_at(i), hi = f.hi_at(i);
            ps.push_back({lo, g * lo, 1, g, 0, hi - lo});          // flat part (sheared by g)
            ps.push_back({hi, g * hi, 0, 1, 0, big});              // upper-bound ray
            ps.push_back({lo, g * lo, 0, -1, 0, big});             // lower-bound ray
            break;
        }
        case K::WeightedAbs: {
            const double d = f.weight_at(i);
            ps.push_back({0, d, 1, g, 0, big});                    // positive branch
            ps.push_back({0, -d, -1, -g, 0, big});                 // negative branch
            ps.push_back({0, -d, 0, 1, 0, 2 * d});                 // kink segment
            break;
        }
        default:
            throw numeric_error("graph projection: unsupported nesting");
    }
    return ps;
}

} // namespace detail

/// Euclidean projection of (z, zeta) onto the graph of the subdifferential
/// map: the nearest exactly feasible pair. Used to snap solver output onto
/// the case structure before cone analysis.
inline std::pair<double, double> nearest_feasible_pair(const IntegrandSpec& f, double z,
                                                       double zeta, std::size_t i = 0) {
    double best_d2 = kInf, bx = z, by = zeta;
    for (const auto& p : detail::graph_pieces(f, i))
        detail::project_onto_piece(p, z, zeta, best_d2, bx, by);
    return {bx, by};
}

} // namespace varcert
