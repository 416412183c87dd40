#pragma once

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "varcert/errors.hpp"
#include "varcert/grid.hpp"
#include "varcert/rng.hpp"

namespace varcert {

using SparseMat = Eigen::SparseMatrix<double>;

namespace detail {

inline Eigen::VectorXd to_eigen(const GridFunction& f) {
    return Eigen::Map<const Eigen::VectorXd>(f.values().data(),
                                             static_cast<Eigen::Index>(f.size()));
}

inline GridFunction from_eigen(const Grid& g, const Eigen::VectorXd& v) {
    return GridFunction(g, std::vector<double>(v.data(), v.data() + v.size()));
}

} // namespace detail

/// Discrete elliptic solution operator for
///     -Laplace(y) + u*y = f   on the unit interval/square,
/// homogeneous Neumann boundary (the natural condition of the weak form),
/// cell-centered finite differences. The assembled system is
///     A_u = stiffness + h^dim * diag(u),   M = h^dim * I,
/// and states solve A_u y = M f. Scaling both sides by the cell volume keeps
/// pointwise multiplication exactly self-adjoint in the quadrature inner
/// product, so all adjoint identities hold to machine precision.
class EllipticOperator {
public:
    explicit EllipticOperator(const Grid& g, double u_floor = 1e-3)
        : grid_(g), u_floor_(u_floor), stiffness_(assemble_stiffness(g)) {
        if (!(u_floor > 0)) throw config_error("epsilon", "admissibility floor must be > 0");
    }

    const Grid& grid() const noexcept { return grid_; }
    double u_floor() const noexcept { return u_floor_; }
    const SparseMat& stiffness() const noexcept { return stiffness_; }

    /// Stiffness of the Neumann Laplacian scaled by the cell volume:
    /// symmetric, positive semidefinite, zero row sums (constants in the
    /// kernel). 3-point in 1-D, 5-point in 2-D, reflection at boundaries.
    static SparseMat assemble_stiffness(const Grid& g) {
        const std::size_t N = g.node_count();
        const int n = g.n_per_axis();
        const double h = g.h();
        const double scale = g.cell_volume() / (h * h);
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(5 * N);
        auto add = [&](std::size_t r, std::size_t c, double v) {
            trip.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
        };
        if (g.dim() == 1) {
            for (int i = 0; i < n; ++i) {
                double diag = 0.0;
                if (i > 0) { add(i, i - 1, -scale); diag += scale; }
                if (i < n - 1) { add(i, i + 1, -scale); diag += scale; }
                add(i, i, diag);
            }
        } else {
            for (int iy = 0; iy < n; ++iy) {
                for (int ix = 0; ix < n; ++ix) {
                    const std::size_t r = static_cast<std::size_t>(iy) * n + ix;
                    double diag = 0.0;
                    if (ix > 0) { add(r, r - 1, -scale); diag += scale; }
                    if (ix < n - 1) { add(r, r + 1, -scale); diag += scale; }
                    if (iy > 0) { add(r, r - n, -scale); diag += scale; }
                    if (iy < n - 1) { add(r, r + n, -scale); diag += scale; }
                    add(r, r, diag);
                }
            }
        }
        SparseMat S(static_cast<int>(N), static_cast<int>(N));
        S.setFromTriplets(trip.begin(), trip.end());
        S.makeCompressed();
        return S;
    }

private:
    Grid grid_;
    double u_floor_;
    SparseMat stiffness_;
};

/// Factorized state: y = S(u) together with the system matrix, reusable for
/// all derivative applications at the same u. Read-only after construction.
class StateCache {
public:
    StateCache(const EllipticOperator& op, GridFunction u, GridFunction f, bool relaxed)
        : grid_(op.grid()), u_(std::move(u)), f_(std::move(f)), y_(grid_) {
        require_same_grid(u_, f_);
        if (u_.grid() != op.grid()) throw numeric_error("state solve: grid mismatch");
        if (!relaxed) {
            double umin = std::numeric_limits<double>::infinity();
            std::size_t at = 0;
            for (std::size_t i = 0; i < u_.size(); ++i)
                if (u_[i] < umin) { umin = u_[i]; at = i; }
            if (umin < op.u_floor())
                throw numeric_error("inadmissible control: min value " + std::to_string(umin) +
                                    " at node " + std::to_string(at) + " is below the floor " +
                                    std::to_string(op.u_floor()));
        }
        const double vol = grid_.cell_volume();
        A_ = op.stiffness();
        for (std::size_t i = 0; i < u_.size(); ++i)
            A_.coeffRef(static_cast<int>(i), static_cast<int>(i)) += vol * u_[i];
        A_.makeCompressed();
        direct_ = grid_.n_per_axis() <= 64;
        if (direct_) {
            ldlt_ = std::make_shared<Eigen::SimplicialLDLT<SparseMat>>();
            ldlt_->compute(A_);
            // A failed factorization (e.g. the singular Neumann matrix at
            // u = 0) only matters once a nonzero right-hand side needs it;
            // zero-forcing instances never do.
            fact_ok_ = ldlt_->info() == Eigen::Success;
        }
        Eigen::VectorXd rhs = vol * detail::to_eigen(f_);
        y_ = solve_system(rhs);
        const double rhs_norm = rhs.norm();
        const double res = (A_ * detail::to_eigen(y_) - rhs).norm();
        if (res > 1e-10 * rhs_norm && res > 1e-300)
            throw numeric_error("state solve: residual " + std::to_string(res) +
                                " exceeds bound");
    }

    const Grid& grid() const noexcept { return grid_; }
    const GridFunction& u() const noexcept { return u_; }
    const GridFunction& y() const noexcept { return y_; }
    const GridFunction& f() const noexcept { return f_; }
    const SparseMat& system_matrix() const noexcept { return A_; }

    /// True when the state vanishes identically, which short-circuits the
    /// derivative actions below exactly.
    bool zero_state() const noexcept {
        for (std::size_t i = 0; i < y_.size(); ++i)
            if (y_[i] != 0.0) return false;
        return true;
    }

    /// Solve A_u x = rhs (rhs already mass-scaled).
    GridFunction solve_system(const Eigen::VectorXd& rhs) const {
        if (rhs.norm() == 0.0) return GridFunction(grid_); // exact zero state
        Eigen::VectorXd x;
        if (direct_) {
            if (!fact_ok_) throw numeric_error("state solve: sparse factorization failed");
            x = ldlt_->solve(rhs);
        } else {
            Eigen::ConjugateGradient<SparseMat, Eigen::Lower | Eigen::Upper> cg;
            cg.setTolerance(1e-12);
            cg.setMaxIterations(static_cast<Eigen::Index>(50 * rhs.size()));
            cg.compute(A_);
            x = cg.solve(rhs);
            if (cg.info() != Eigen::Success)
                throw numeric_error("state solve: conjugate gradients did not converge");
        }
        if (!x.allFinite()) throw numeric_error("state solve: non-finite solution");
        return detail::from_eigen(grid_, x);
    }

private:
    Grid grid_;
    GridFunction u_, f_, y_;
    SparseMat A_;
    bool direct_ = true;
    bool fact_ok_ = true;
    std::shared_ptr<Eigen::SimplicialLDLT<SparseMat>> ldlt_;
};

/// y = S(u): solve the state equation. The admissibility floor u >= epsilon
/// is enforced here (reporting the minimum and its node); iterate paths
/// inside solvers use relaxed = true, where factorization success and the
/// residual bound are the operative checks.
inline StateCache solve_state(const EllipticOperator& op, const GridFunction& u,
                              const GridFunction& f, bool relaxed = false) {
    return StateCache(op, u, f, relaxed);
}

/// Directional derivative w = S'(u) hdir: solves A_u w = -M (y * hdir).
inline GridFunction jacobian_apply(const StateCache& c, const GridFunction& hdir) {
    require_same_grid(c.y(), hdir);
    const double vol = c.grid().cell_volume();
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(hdir.size()));
    for (std::size_t i = 0; i < hdir.size(); ++i) rhs[static_cast<Eigen::Index>(i)] =
        -vol * c.y()[i] * hdir[i];
    return c.solve_system(rhs);
}

/// Adjoint derivative S'(u)* gdir = y * z with A_u z = -M gdir; exact
/// adjoint of jacobian_apply in the quadrature inner product because A_u is
/// symmetric and multiplication by y is diagonal.
inline GridFunction adjoint_apply(const StateCache& c, const GridFunction& gdir) {
    require_same_grid(c.y(), gdir);
    if (c.zero_state()) return GridFunction(c.grid()); // y*z = 0 for any z
    const double vol = c.grid().cell_volume();
    Eigen::VectorXd rhs = -vol * detail::to_eigen(gdir);
    GridFunction z = c.solve_system(rhs);
    GridFunction out(c.grid());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = c.y()[i] * z[i];
    return out;
}

/// Derivative in u of the map u -> S'(u)* v, applied to xi:
///     w_xi * z + y * zdot,
/// where A_u z = -M v, w_xi = S'(u) xi, A_u zdot = -M (xi * z). This is the
/// Hessian action of u -> <K(u), v>, hence symmetric in (xi, xi').
inline GridFunction second_adjoint_apply(const StateCache& c, const GridFunction& v,
                                         const GridFunction& xi) {
    require_same_grid(c.y(), v);
    require_same_grid(c.y(), xi);
    // y = 0 forces w_xi = 0 (its right-hand side is y-weighted), so both
    // products below vanish identically.
    if (c.zero_state()) return GridFunction(c.grid());
    const double vol = c.grid().cell_volume();
    GridFunction z = c.solve_system(-vol * detail::to_eigen(v));
    GridFunction w_xi = jacobian_apply(c, xi);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(xi.size()));
    for (std::size_t i = 0; i < xi.size(); ++i)
        rhs[static_cast<Eigen::Index>(i)] = -vol * xi[i] * z[i];
    GridFunction zdot = c.solve_system(rhs);
    GridFunction out(c.grid());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = w_xi[i] * z[i] + c.y()[i] * zdot[i];
    return out;
}

struct OperatorNorms {
    double norm_J = 0.0; // ||S'(u)||
    double norm_B = 0.0; // ||S'(u) (alpha I)^{-1} S'(u)*||
    bool converged = true;
    int iterations_J = 0, iterations_B = 0;
};

namespace detail {

/// Power iteration for the largest eigenvalue of a symmetric positive
/// semidefinite operator given by `apply`, deterministic start.
template <typename Apply>
std::pair<double, int> power_iteration(const Grid& g, Apply&& apply, double rel_tol,
                                       int max_iter, std::uint64_t seed, bool& converged) {
    Rng rng(seed);
    GridFunction x(g);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
    double nx = norm(x);
    if (nx == 0.0) { x[0] = 1.0; nx = norm(x); }
    x = scaled(1.0 / nx, x);
    double lambda = 0.0;
    for (int k = 1; k <= max_iter; ++k) {
        GridFunction Ax = apply(x);
        const double lam = inner(x, Ax); // Rayleigh quotient, x normalized
        const double nAx = norm(Ax);
        if (nAx == 0.0) { converged = true; return {0.0, k}; }
        x = scaled(1.0 / nAx, Ax);
        if (k > 1 && std::abs(lam - lambda) <= rel_tol * std::abs(lam)) {
            converged = true;
            return {lam, k};
        }
        lambda = lam;
    }
    converged = false;
    return {lambda, max_iter};
}

} // namespace detail

/// Power-iteration estimates of ||S'(u)|| and ||B|| for B = S'(u) (1/alpha)
/// S'(u)*, relative tolerance 1e-6, deterministic seed. Non-convergence is
/// reported via the flag, not fatal.
inline OperatorNorms operator_norm_estimates(const StateCache& c, double alpha = 1.0,
                                             std::uint64_t seed = 20240601ull,
                                             double rel_tol = 1e-6, int max_iter = 100000) {
    OperatorNorms out;
    bool okJ = true, okB = true;
    // ||J||^2 = largest eigenvalue of J*J.
    auto [lamJ, itJ] = detail::power_iteration(
        c.grid(),
        [&](const GridFunction& x) { return adjoint_apply(c, jacobian_apply(c, x)); }, rel_tol,
        max_iter, seed, okJ);
    // B is itself symmetric PSD on the data space.
    auto [lamB, itB] = detail::power_iteration(
        c.grid(),
        [&](const GridFunction& x) {
            return jacobian_apply(c, scaled(1.0 / alpha, adjoint_apply(c, x)));
        },
        rel_tol, max_iter, seed + 1, okB);
    out.norm_J = std::sqrt(std::max(0.0, lamJ));
    out.norm_B = lamB;
    out.iterations_J = itJ;
    out.iterations_B = itB;
    out.converged = okJ && okB;
    return out;
}

/// Dense matrix of S'(u) in the nodal basis (columns are Jacobian
/// applications to unit vectors). Test oracle and certificate building
/// block; guarded by the caller's size checks.
inline Eigen::MatrixXd dense_jacobian(const StateCache& c) {
    const std::size_t N = c.y().size();
    Eigen::MatrixXd J(N, N);
    for (std::size_t j = 0; j < N; ++j) {
        GridFunction e(c.grid());
        e[j] = 1.0;
        GridFunction col = jacobian_apply(c, e);
        for (std::size_t i = 0; i < N; ++i) J(static_cast<Eigen::Index>(i),
                                              static_cast<Eigen::Index>(j)) = col[i];
    }
    return J;
}

} // namespace varcert
