#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "varcert/elliptic.hpp"
#include "varcert/errors.hpp"
#include "varcert/grid.hpp"
#include "varcert/integrands.hpp"

namespace varcert {

/// The regularized fitting problem in saddle form:
///   min_u max_v  G(u) + <K(u), v> - F*(v),
/// with G = (alpha/2)||u||^2, K(u) = S(u) - data, and F* one of the two
/// fitting conjugates (box indicator for L1 misfits, weighted abs for
/// max-norm misfits), optionally Moreau-Yosida smoothed with parameter gamma.
class SaddleProblem {
public:
    SaddleProblem(EllipticOperator elliptic, GridFunction forcing, GridFunction data,
                  double alpha, IntegrandSpec fstar, double gamma = 0.0)
        : elliptic_(std::move(elliptic)),
          forcing_(std::move(forcing)),
          data_(std::move(data)),
          alpha_(alpha),
          fstar_(std::move(fstar)),
          gamma_(gamma) {
        if (!(alpha_ > 0)) throw config_error("alpha", "alpha must be positive");
        if (gamma_ < 0) throw config_error("gamma", "gamma must be nonnegative");
        require_same_grid(forcing_, data_);
        if (forcing_.grid() != elliptic_.grid())
            throw config_error("grid", "forcing grid does not match the operator grid");
        using K = IntegrandSpec::Kind;
        const K base = fstar_.base().kind;
        if (base != K::IndicatorInterval && base != K::WeightedAbs)
            throw config_error("fstar", "conjugate integrand must be a fitting variant");
        if (fstar_.kind == K::MoreauYosida && fstar_.gamma != gamma_)
            throw config_error("gamma", "wrapped integrand disagrees with gamma");
        if (gamma_ > 0 && fstar_.kind != K::MoreauYosida)
            fstar_ = IntegrandSpec::moreau_yosida(fstar_, gamma_);
    }

    static SaddleProblem l1_fitting(EllipticOperator elliptic, GridFunction forcing,
                                    GridFunction data, double alpha, double gamma = 0.0) {
        return SaddleProblem(std::move(elliptic), std::move(forcing), std::move(data), alpha,
                             IntegrandSpec::indicator_interval(-1.0, 1.0), gamma);
    }
    static SaddleProblem linf_fitting(EllipticOperator elliptic, GridFunction forcing,
                                      GridFunction data, double alpha, double delta,
                                      double gamma = 0.0) {
        return SaddleProblem(std::move(elliptic), std::move(forcing), std::move(data), alpha,
                             IntegrandSpec::weighted_abs(delta), gamma);
    }

    const EllipticOperator& elliptic() const noexcept { return elliptic_; }
    const GridFunction& forcing() const noexcept { return forcing_; }
    const GridFunction& data() const noexcept { return data_; }
    const Grid& grid() const noexcept { return elliptic_.grid(); }
    double alpha() const noexcept { return alpha_; }
    double gamma() const noexcept { return gamma_; }
    const IntegrandSpec& fstar() const noexcept { return fstar_; }

    /// Forward solve at u. Iterate paths tolerate controls below the
    /// admissibility floor; factorization success and the residual bound are
    /// the operative checks there.
    StateCache state(const GridFunction& u, bool relaxed = true) const {
        return solve_state(elliptic_, u, forcing_, relaxed);
    }
    /// K(u) = S(u) - data for an existing cache.
    GridFunction misfit(const StateCache& c) const {
        return lincomb(1.0, c.y(), -1.0, data_);
    }

private:
    EllipticOperator elliptic_;
    GridFunction forcing_, data_;
    double alpha_;
    IntegrandSpec fstar_;
    double gamma_;
};

/// Candidate primal-dual pair; not necessarily optimal.
struct SaddlePoint {
    GridFunction u, v;
};

/// Optimality residual of the critical-point system, measured through the
/// proximal reformulation of the dual inclusion.
struct Residual {
    GridFunction r_primal, r_dual;
    double norm = 0.0;
};

/// Pointwise proximal map of sigma*F* applied to w.
inline GridFunction prox_fstar(const IntegrandSpec& fstar, double sigma, const GridFunction& w) {
    if (!(sigma > 0)) throw config_error("sigma", "prox step must be positive");
    GridFunction out(w.grid());
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = prox_scalar(fstar, sigma, w[i], i);
    return out;
}

/// Integral of the conjugate integrand; +inf when any node is outside the
/// domain (box indicators).
inline double fstar_value(const IntegrandSpec& fstar, const GridFunction& v) {
    double total = 0.0;
    const double vol = v.grid().cell_volume();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double fi = integrand_value(fstar, v[i], i);
        if (fi == kInf) return kInf;
        total += vol * fi;
    }
    return total;
}

/// G(u) + <K(u), v> - F*(v), extended-real valued: -inf when the max player
/// leaves the domain of F*.
inline double lagrangian(const SaddleProblem& p, const SaddlePoint& q) {
    require_same_grid(q.u, q.v);
    const double fs = fstar_value(p.fstar(), q.v);
    if (fs == kInf) return -kInf;
    StateCache c = p.state(q.u);
    const double g = 0.5 * p.alpha() * inner(q.u, q.u);
    return g + inner(p.misfit(c), q.v) - fs;
}

/// Residual of the critical-point system at q via a precomputed state cache:
///   r_primal = alpha*u + grad K(u)* v   (the G-side inclusion, G quadratic)
///   r_dual   = v - prox_{sigma F*}(v + sigma K(u))
/// Zero residual is equivalent to the two subdifferential inclusions; sigma
/// only reconditions the dual part.
inline Residual residual(const SaddleProblem& p, const StateCache& c, const SaddlePoint& q,
                         double sigma = 1.0) {
    if (!(sigma > 0)) throw config_error("sigma", "residual sigma must be positive");
    Residual r;
    r.r_primal = lincomb(p.alpha(), q.u, 1.0, adjoint_apply(c, q.v));
    const GridFunction arg = lincomb(1.0, q.v, sigma, p.misfit(c));
    r.r_dual = lincomb(1.0, q.v, -1.0, prox_fstar(p.fstar(), sigma, arg));
    r.norm = std::sqrt(inner(r.r_primal, r.r_primal) + inner(r.r_dual, r.r_dual));
    return r;
}

inline Residual residual(const SaddleProblem& p, const SaddlePoint& q, double sigma = 1.0) {
    StateCache c = p.state(q.u);
    return residual(p, c, q, sigma);
}

/// Solver variant. ExactDual maximizes the dual in closed form each step
/// (available when gamma > 0 makes the dual strongly concave) and descends
/// the reduced objective with a backtracked primal step; PDHG alternates
/// proximal steps with the forward map linearized at an extrapolated primal
/// point. Auto picks ExactDual when gamma > 0.
enum class SolveMethod { Auto, ExactDual, PDHG };

struct SolveOptions {
    double tol = 1e-8;       // residual norm target
    int max_iter = 20000;
    int check_every = 25;    // residual/step-retuning cadence
    SolveMethod method = SolveMethod::Auto;
    double sigma = 1.0;      // residual conditioning parameter

    // PDHG path (gamma = 0).
    double step_safety = 0.9; // tau*sigma*L^2 <= step_safety
    // sigma/tau = step_ratio^2: a primal step shorter than the dual one keeps
    // the extrapolated control inside the region where the linearization is
    // trustworthy (the forward map is nonlinear in u, affine in v).
    double step_ratio = 10.0;
    double step_cap = 1e3;    // bound on either step when the linearization vanishes
    // Per-iteration bound on primal movement relative to the iterate size;
    // stops the state solve's small-control amplification from catapulting
    // the control (vanishes at fixed points, so exactness is unaffected).
    double trust_fraction = 0.2;

    // ExactDual path (gamma > 0): Armijo backtracking on the reduced
    // objective.
    double armijo_c = 1e-4;
    double backtrack = 0.5;
    double step_grow = 1.5;
    double t_init = 1.0;
    double t_max = 1e3;
    double t_min = 1e-14;
    // Below this gradient norm, objective decrements per step fall under the
    // floating-point resolution of the objective value, so step acceptance
    // switches from Armijo to gradient-norm non-increase (computed directly,
    // hence not subject to that floor).
    double tail_threshold = 1e-5;
};

struct SolveDiagnostics {
    bool converged = false;
    int iterations = 0;
    double final_residual = std::numeric_limits<double>::quiet_NaN();
    double max_iterate_norm = 0.0; // max-norm monitor over checked iterates
    std::vector<std::pair<int, double>> residual_history;
};

struct SolveResult {
    SaddlePoint point;
    SolveDiagnostics diagnostics;
};

namespace detail {

/// Exact dual maximizer for gamma > 0: argmax_v <k,v> - F*(v) - gamma/2|v|^2
/// pointwise, via the proximal map of the base conjugate with step 1/gamma.
inline GridFunction dual_argmax(const IntegrandSpec& fstar_base, double gamma,
                                const GridFunction& k) {
    GridFunction v(k.grid());
    for (std::size_t i = 0; i < k.size(); ++i)
        v[i] = prox_scalar(fstar_base, 1.0 / gamma, k[i] / gamma, i);
    return v;
}

/// Reduced objective for gamma > 0:
///   Phi(u) = G(u) + sum_i vol * [ k_i v_i - f*_i(v_i) - gamma/2 v_i^2 ],
/// with v the exact dual maximizer at k = K(u). Decreasing Phi is the
/// global safeguard of the exact-dual solve path.
inline double reduced_value(const SaddleProblem& p, const GridFunction& u,
                            const StateCache& c, const GridFunction& v) {
    const IntegrandSpec base = p.fstar().base();
    const GridFunction k = p.misfit(c);
    const double vol = p.grid().cell_volume();
    double env = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i)
        env += vol * (k[i] * v[i] - integrand_value(base, v[i], i) -
                      0.5 * p.gamma() * v[i] * v[i]);
    return 0.5 * p.alpha() * inner(u, u) + env;
}

inline double maxnorm2(const GridFunction& a, const GridFunction& b) {
    double mx = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        mx = std::max({mx, std::abs(a[i]), std::abs(b[i])});
    return mx;
}

/// One point of the reduced problem: state, exact dual, objective, gradient.
struct ReducedEval {
    StateCache c;
    GridFunction v;
    GridFunction grad;
    double phi = 0.0;
    double gnorm = 0.0;
};

inline ReducedEval reduced_eval(const SaddleProblem& p, const GridFunction& u,
                                bool relaxed = true) {
    StateCache c = p.state(u, relaxed);
    GridFunction v = dual_argmax(p.fstar().base(), p.gamma(), p.misfit(c));
    const double phi = reduced_value(p, u, c, v);
    // grad Phi(u) = alpha u + grad K(u)* v(u); this is exactly the primal
    // residual, and the dual residual vanishes at v = v(u).
    GridFunction grad = lincomb(p.alpha(), u, 1.0, adjoint_apply(c, v));
    const double gnorm = norm(grad);
    return {std::move(c), std::move(v), std::move(grad), phi, gnorm};
}

/// Descent path on the reduced objective (gamma > 0): each step has a
/// closed-form dual, so the dual residual vanishes identically and descent
/// cannot be catapulted by the state solve's amplification near degenerate
/// controls. Globalized by Armijo backtracking on the objective; once the
/// gradient is small enough that objective decrements drown in floating-point
/// roundoff of the objective value, steps are guarded by gradient-norm
/// non-increase instead, which is evaluated directly and has no such floor.
inline SolveResult solve_exact_dual(const SaddleProblem& p, const SaddlePoint& init,
                                    const SolveOptions& opts) {
    SolveResult out;
    out.point = init;
    GridFunction u = init.u;
    ReducedEval e = reduced_eval(p, u, false); // admissible init enforced here
    double t = opts.t_init;
    double best = kInf;
    bool tail = false;

    for (int k = 1; k <= opts.max_iter; ++k) {
        if (k % opts.check_every == 0 || e.gnorm <= opts.tol || k == opts.max_iter)
            out.diagnostics.residual_history.emplace_back(k, e.gnorm);
        out.diagnostics.max_iterate_norm =
            std::max(out.diagnostics.max_iterate_norm, maxnorm2(u, e.v));
        if (e.gnorm < best) {
            best = e.gnorm;
            out.point = {u, e.v};
        }
        if (e.gnorm <= opts.tol) {
            const Residual r = residual(p, e.c, {u, e.v}, opts.sigma);
            out.diagnostics.converged = r.norm <= opts.tol;
            out.diagnostics.iterations = k;
            out.diagnostics.final_residual = r.norm;
            return out;
        }
        if (!tail && e.gnorm <= opts.tail_threshold) tail = true;

        // Backtracking; state-solve breakdown counts as a rejected trial.
        bool moved = false;
        while (t >= opts.t_min) {
            const GridFunction u_try = lincomb(1.0, u, -t, e.grad);
            try {
                ReducedEval et = reduced_eval(p, u_try);
                const bool accept =
                    tail ? et.gnorm <= e.gnorm * (1.0 + 1e-6)
                         : std::isfinite(et.phi) &&
                               et.phi <= e.phi - opts.armijo_c * t * e.gnorm * e.gnorm;
                if (accept) {
                    u = u_try;
                    e = std::move(et);
                    moved = true;
                }
            } catch (const numeric_error&) {
                // Trial state solve broke down: objective is +inf there.
            }
            if (moved) break;
            t *= opts.backtrack;
        }
        if (!moved) {
            if (tail) break; // even gradient-guarded steps stall: give up
            tail = true;     // objective comparisons exhausted by roundoff
            t = opts.t_init;
            continue;
        }
        t = std::min(t * opts.step_grow, opts.t_max);
    }
    out.diagnostics.converged = false;
    out.diagnostics.iterations = opts.max_iter;
    out.diagnostics.final_residual = best;
    return out;
}

/// Safeguarded PDHG path (used when gamma = 0): forward map linearized at the
/// extrapolated primal point, linearization point floored to the operator's
/// admissible region, per-iteration trust cap on primal movement, and step
/// sizes retuned to the local linearization norm at every check.
inline SolveResult solve_pdhg(const SaddleProblem& p, const SaddlePoint& init,
                              const SolveOptions& opts) {
    const double floor = p.elliptic().u_floor();
    const double root = std::sqrt(opts.step_safety);
    StateCache c0 = p.state(init.u, false); // admissible init enforced here
    double L = operator_norm_estimates(c0, 1.0, 20240601ull, 1e-3).norm_J;
    auto tune = [&](double Lk, double& tau, double& sig) {
        tau = std::min(Lk > 0 ? root / (Lk * opts.step_ratio) : opts.step_cap, opts.step_cap);
        sig = std::min(Lk > 0 ? root * opts.step_ratio / Lk : opts.step_cap, opts.step_cap);
    };
    double tau = 0, sigma_pd = 0;
    tune(L, tau, sigma_pd);

    GridFunction u = init.u, v = init.v, u_bar = init.u;
    SolveResult out;
    out.point = init;
    double best = kInf;

    // A warm start that already satisfies the tolerance must be returned
    // unchanged (re-solving from a solution is a no-op).
    {
        const Residual r0 = residual(p, c0, init, opts.sigma);
        if (r0.norm <= opts.tol) {
            out.diagnostics.converged = true;
            out.diagnostics.iterations = 0;
            out.diagnostics.final_residual = r0.norm;
            out.diagnostics.residual_history.emplace_back(0, r0.norm);
            out.diagnostics.max_iterate_norm = maxnorm2(init.u, init.v);
            return out;
        }
    }

    for (int k = 1; k <= opts.max_iter; ++k) {
        GridFunction ub = u_bar;
        for (std::size_t i = 0; i < ub.size(); ++i) ub[i] = std::max(ub[i], floor);
        StateCache cb = p.state(ub);
        // Dual ascent on the linearized coupling.
        const GridFunction varg = lincomb(1.0, v, sigma_pd, p.misfit(cb));
        v = prox_fstar(p.fstar(), sigma_pd, varg);
        // Primal descent; G quadratic gives a closed-form prox.
        const GridFunction grad = adjoint_apply(cb, v);
        GridFunction u_next = scaled(1.0 / (1.0 + tau * p.alpha()),
                                     lincomb(1.0, u, -tau, grad));
        double umax = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) umax = std::max(umax, std::abs(u[i]));
        const double cap = opts.trust_fraction * (1.0 + umax);
        for (std::size_t i = 0; i < u.size(); ++i)
            u_next[i] = std::clamp(u_next[i], u[i] - cap, u[i] + cap);
        u_bar = lincomb(2.0, u_next, -1.0, u);
        u = u_next;

        if (k % opts.check_every == 0 || k == opts.max_iter) {
            GridFunction uc = u;
            for (std::size_t i = 0; i < uc.size(); ++i) uc[i] = std::max(uc[i], floor);
            StateCache cl = p.state(uc);
            const double Lk = operator_norm_estimates(cl, 1.0, 20240601ull, 1e-3).norm_J;
            if (Lk > 0) tune(Lk, tau, sigma_pd);
            out.diagnostics.max_iterate_norm =
                std::max(out.diagnostics.max_iterate_norm, maxnorm2(u, v));
            try {
                StateCache cc = p.state(u);
                const Residual r = residual(p, cc, {u, v}, opts.sigma);
                out.diagnostics.residual_history.emplace_back(k, r.norm);
                if (r.norm < best) {
                    best = r.norm;
                    out.point = {u, v};
                }
                if (r.norm <= opts.tol) {
                    out.diagnostics.converged = true;
                    out.diagnostics.iterations = k;
                    out.diagnostics.final_residual = r.norm;
                    return out;
                }
            } catch (const numeric_error&) {
                // Residual not evaluable here (state solve breakdown at the
                // raw iterate); keep iterating from the safeguarded path.
            }
        }
    }
    out.diagnostics.converged = false;
    out.diagnostics.iterations = opts.max_iter;
    out.diagnostics.final_residual = best;
    return out;
}

} // namespace detail

/// Saddle-point solve: deterministic for fixed options; non-convergence
/// returns the best iterate with the flag cleared. Auto method: exact-dual
/// descent when gamma > 0 (strongly concave dual), safeguarded PDHG when
/// gamma = 0.
inline SolveResult solve_saddle(const SaddleProblem& p, const SaddlePoint& init,
                                const SolveOptions& opts = {}) {
    require_same_grid(init.u, init.v);
    if (init.u.grid() != p.grid()) throw config_error("init", "initial point grid mismatch");
    SolveMethod m = opts.method;
    if (m == SolveMethod::Auto)
        m = p.gamma() > 0 ? SolveMethod::ExactDual : SolveMethod::PDHG;
    if (m == SolveMethod::ExactDual && !(p.gamma() > 0))
        throw config_error("method", "exact-dual path needs gamma > 0");
    return m == SolveMethod::ExactDual ? detail::solve_exact_dual(p, init, opts)
                                       : detail::solve_pdhg(p, init, opts);
}

/// Mode for the block operator T: the monotone-operator linearization H at a
/// fixed base point (G-block = alpha I), or the full second-order variant R0
/// whose G-block carries the curvature of u -> grad K(u)* v.
enum class TMode { Plain, Curvature };

/// Matrix-free block operator
///   T = [ G_blk   K*  ]
///       [ -K    gamma ]
/// with G_blk = alpha I (Plain mode) or alpha I + second-order term (Curvature).
class BlockOperatorT {
public:
    BlockOperatorT(const SaddleProblem& p, SaddlePoint q, TMode mode)
        : mode_(mode),
          alpha_(p.alpha()),
          gamma_(p.gamma()),
          v_(std::move(q.v)),
          cache_(p.state(q.u)) {}

    TMode mode() const noexcept { return mode_; }
    double alpha() const noexcept { return alpha_; }
    double gamma() const noexcept { return gamma_; }
    const StateCache& cache() const noexcept { return cache_; }
    const Grid& grid() const noexcept { return cache_.grid(); }

    /// G-block action on a primal direction.
    GridFunction G_apply(const GridFunction& xi) const {
        if (mode_ == TMode::Plain) return scaled(alpha_, xi);
        return lincomb(alpha_, xi, 1.0, second_adjoint_apply(cache_, v_, xi));
    }
    GridFunction K_apply(const GridFunction& xi) const { return jacobian_apply(cache_, xi); }
    GridFunction K_adjoint_apply(const GridFunction& w) const {
        return adjoint_apply(cache_, w);
    }

    /// T(a, b) = (G a + K* b, -K a + gamma b).
    std::pair<GridFunction, GridFunction> apply(const GridFunction& a,
                                                const GridFunction& b) const {
        return {lincomb(1.0, G_apply(a), 1.0, K_adjoint_apply(b)),
                lincomb(-1.0, K_apply(a), gamma_, b)};
    }
    /// T*(a, b) = (G a - K* b, K a + gamma b); the G-block is self-adjoint.
    std::pair<GridFunction, GridFunction> adjoint(const GridFunction& a,
                                                  const GridFunction& b) const {
        return {lincomb(1.0, G_apply(a), -1.0, K_adjoint_apply(b)),
                lincomb(1.0, K_apply(a), gamma_, b)};
    }

private:
    TMode mode_;
    double alpha_, gamma_;
    GridFunction v_;
    StateCache cache_;
};

/// Assemble the block operator at q; Plain mode fixes the base point and uses
/// the plain alpha I G-block, Curvature mode adds the curvature term.
inline BlockOperatorT assemble_T(const SaddleProblem& p, const SaddlePoint& q,
                                 TMode mode = TMode::Curvature) {
    return BlockOperatorT(p, q, mode);
}

} // namespace varcert
