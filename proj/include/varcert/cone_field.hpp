#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "varcert/errors.hpp"
#include "varcert/grid.hpp"
#include "varcert/integrands.hpp"
#include "varcert/sets.hpp"

namespace varcert {

namespace detail {

/// Admissible-direction cone of the (convexified) graph derivative at one
/// feasible pair: the set of dz for which the derivative is nonempty.
/// Returns Empty when (z, zeta) is not on the graph.
inline ConeKind1D node_cone(const IntegrandSpec& f, double z, double zeta, std::size_t i,
                            double tol) {
    using K = IntegrandSpec::Kind;
    switch (f.kind) {
        case K::SquaredTwoNorm:
            return std::abs(zeta - f.weight_at(i) * z) <= tol ? ConeKind1D::FullLine
                                                              : ConeKind1D::Empty;
        case K::IndicatorInterval: {
            const double lo = f.lo_at(i), hi = f.hi_at(i);
            if (z < lo - tol || z > hi + tol) return ConeKind1D::Empty;
            const bool at_hi = std::abs(z - hi) <= tol, at_lo = std::abs(z - lo) <= tol;
            if (!at_hi && !at_lo)
                return std::abs(zeta) <= tol ? ConeKind1D::FullLine : ConeKind1D::Empty;
            const double s = at_hi ? 1.0 : -1.0;
            if (zeta * s < -tol) return ConeKind1D::Empty;  // multiplier points inward
            if (zeta * s > tol) return ConeKind1D::Zero;    // strictly active
            return halfline_from_sign(-s);                  // boundary, zero multiplier
        }
        case K::WeightedAbs: {
            const double d = f.weight_at(i);
            if (std::abs(z) > tol) {
                const double want = z > 0 ? d : -d;
                return std::abs(zeta - want) <= tol ? ConeKind1D::FullLine : ConeKind1D::Empty;
            }
            const double a = std::abs(zeta);
            if (a > d + tol) return ConeKind1D::Empty;
            if (std::abs(a - d) <= tol) return halfline_from_sign(zeta >= 0 ? 1.0 : -1.0);
            return ConeKind1D::Zero;                        // interior multiplier pins z
        }
        case K::MoreauYosida:
            return node_cone(f.base(), z, zeta - f.gamma * z, i, tol);
    }
    return ConeKind1D::Empty;
}

} // namespace detail

/// Pointwise admissible cone K[v|eta] of the dual pair: at each node, the
/// directions dz along which the convexified graph derivative is nonempty.
/// Infeasible pairs raise infeasible_error naming the offending nodes.
inline ConeField cone_field(const IntegrandSpec& f, const GridFunction& v,
                            const GridFunction& eta, double tol = kTolFeas) {
    require_same_grid(v, eta);
    ConeField K(v.grid());
    std::vector<std::size_t> bad;
    for (std::size_t i = 0; i < v.size(); ++i) {
        K[i] = detail::node_cone(f, v[i], eta[i], i, tol);
        if (K[i] == ConeKind1D::Empty) bad.push_back(i);
    }
    if (!bad.empty()) {
        std::string msg = "dual pair infeasible at " + std::to_string(bad.size()) +
                          " node(s), first " + std::to_string(bad.front());
        throw infeasible_error(std::move(msg), std::move(bad));
    }
    return K;
}

/// Non-throwing variant; the second member lists infeasible nodes (empty on
/// success).
inline std::pair<ConeField, std::vector<std::size_t>> try_cone_field(const IntegrandSpec& f,
                                                                     const GridFunction& v,
                                                                     const GridFunction& eta,
                                                                     double tol = kTolFeas) {
    require_same_grid(v, eta);
    ConeField K(v.grid());
    std::vector<std::size_t> bad;
    for (std::size_t i = 0; i < v.size(); ++i) {
        K[i] = detail::node_cone(f, v[i], eta[i], i, tol);
        if (K[i] == ConeKind1D::Empty) bad.push_back(i);
    }
    return {std::move(K), std::move(bad)};
}

/// Snap an approximately feasible dual pair onto the graph, nodewise nearest
/// point. Returns the snapped pair and the largest nodewise move.
struct SnapResult {
    GridFunction v, eta;
    double max_move = 0.0;
};

inline SnapResult snap_feasible(const IntegrandSpec& f, const GridFunction& v,
                                const GridFunction& eta) {
    require_same_grid(v, eta);
    SnapResult r{GridFunction(v.grid()), GridFunction(v.grid()), 0.0};
    for (std::size_t i = 0; i < v.size(); ++i) {
        auto [zv, ze] = nearest_feasible_pair(f, v[i], eta[i], i);
        r.v[i] = zv;
        r.eta[i] = ze;
        r.max_move = std::max(r.max_move, std::hypot(zv - v[i], ze - eta[i]));
    }
    return r;
}

/// Result of the coderivative (upper adjoint of the convexified graph
/// derivative): either empty, or the affine set {offset + w : w in cone}
/// with cone the nodewise polar of the admissible cone.
struct CoderivativeResult {
    bool empty = false;
    std::vector<std::size_t> violating_nodes; // where the guard -deta in K°° failed
    GridFunction offset;
    ConeField cone;
};

/// Linear part T of the graph derivative at regular points: gamma*I for
/// Moreau-Yosida, alpha*I for the quadratic (its graph is the subspace
/// {(z, alpha z)}), zero for the purely nonsmooth kinds.
inline double coderivative_linear_coeff(const IntegrandSpec& f, std::size_t i) {
    using K = IntegrandSpec::Kind;
    if (f.kind == K::MoreauYosida) return f.gamma;
    if (f.kind == K::SquaredTwoNorm) return f.weight_at(i);
    return 0.0;
}

/// Coderivative of the subdifferential map at a feasible pair, applied to
/// deta: T*deta + K° when -deta lies in the bipolar of the admissible cone,
/// empty otherwise. The guard and the polar act nodewise because the cone is
/// a product.
inline CoderivativeResult coderivative(const IntegrandSpec& f, const GridFunction& v,
                                       const GridFunction& eta, const GridFunction& deta,
                                       double tol = kTolFeas) {
    require_same_grid(v, eta);
    require_same_grid(v, deta);
    const ConeField K = cone_field(f, v, eta, tol);
    CoderivativeResult r;
    r.offset = GridFunction(v.grid());
    r.cone = ConeField(v.grid());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const ConeKind1D bipolar = cone_polar(cone_polar(K[i]));
        if (!cone_contains(bipolar, -deta[i], tol)) {
            r.violating_nodes.push_back(i);
            continue;
        }
        r.offset[i] = coderivative_linear_coeff(f, i) * deta[i];
        r.cone[i] = cone_polar(K[i]);
    }
    r.empty = !r.violating_nodes.empty();
    return r;
}

/// Data-fit families: which conjugate integrand the misfit term uses.
enum class FitKind { L1Fit, LinfFit };

inline IntegrandSpec fit_conjugate_integrand(FitKind kind, double delta) {
    // L1 misfit: F = ||.||_1, F* = indicator of the unit sup-ball, nodewise
    // [-1, 1]. Linf misfit: F = indicator of the delta sup-ball shifted into
    // the objective; F* = delta * ||.||_1, nodewise delta*|.|.
    if (kind == FitKind::L1Fit) return IntegrandSpec::indicator_interval(-1.0, 1.0);
    return IntegrandSpec::weighted_abs(delta);
}

/// Nodewise strict complementarity of a dual pair. For the L1 misfit the two
/// clauses are (1-|v_i|)*eta_i = 0 and (1-|v_i|) + |eta_i| > 0; for the Linf
/// misfit, v_i*(delta-|eta_i|) = 0 and |v_i| + (delta-|eta_i|) > 0. delta is
/// ignored for L1Fit.
struct StrictComplementarity {
    bool holds = true;
    std::vector<char> node_ok;
    std::vector<std::size_t> violating_nodes;
};

inline StrictComplementarity strict_complementarity(FitKind kind, const std::vector<double>& v,
                                                    const std::vector<double>& eta,
                                                    double delta = 1.0, double tol = kTolFeas) {
    if (v.size() != eta.size()) throw numeric_error("strict complementarity: length mismatch");
    StrictComplementarity r;
    r.node_ok.resize(v.size(), 1);
    for (std::size_t i = 0; i < v.size(); ++i) {
        bool ok;
        if (kind == FitKind::L1Fit) {
            const bool at_bound = std::abs(1.0 - std::abs(v[i])) <= tol;
            const bool eta_zero = std::abs(eta[i]) <= tol;
            ok = (at_bound || eta_zero) && !(at_bound && eta_zero);
        } else {
            const bool v_zero = std::abs(v[i]) <= tol;
            const bool at_delta = std::abs(delta - std::abs(eta[i])) <= tol;
            ok = (v_zero || at_delta) && !(v_zero && at_delta);
        }
        r.node_ok[i] = ok ? 1 : 0;
        if (!ok) {
            r.holds = false;
            r.violating_nodes.push_back(i);
        }
    }
    return r;
}

inline StrictComplementarity strict_complementarity(FitKind kind, const GridFunction& v,
                                                    const GridFunction& eta, double delta = 1.0,
                                                    double tol = kTolFeas) {
    require_same_grid(v, eta);
    return strict_complementarity(kind, v.values(), eta.values(), delta, tol);
}

} // namespace varcert
