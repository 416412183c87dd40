#pragma once

// Cone-constrained smallest-distance kernel: given a dense matrix A, a
// nodewise domain cone K and a nodewise range cone C, compute
//
//     inf { dist(A w, C) : w in K, ||w|| = 1 }
//
// in the Euclidean norm.  Instances where both cones are subspaces (every
// coordinate Zero or FullLine) reduce to a smallest-singular-value problem
// and are solved exactly.  General instances get a certified lower bound
// (relax every half-line to a full line, then solve the subspace problem)
// and a witness-backed upper bound from seeded multistart projected descent.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "varcert/errors.hpp"
#include "varcert/rng.hpp"
#include "varcert/sets.hpp"

namespace varcert {

struct ConeMinOptions {
    int starts = 16;              // multistart count for the projected descent
    int iters = 500;              // descent iterations per start
    std::uint64_t seed = 20240601ull;
};

struct ConeMinResult {
    double lower = 0.0;           // certified lower bound on the infimum
    double upper = kInf;          // value attained by `witness` (inf over the empty set is +inf)
    bool exact = false;           // lower == upper == infimum (subspace reduction applied)
    Eigen::VectorXd witness;      // best feasible unit vector found; size 0 when none exists
};

namespace detail {

inline bool is_subspace_kind(ConeKind1D k) {
    return k == ConeKind1D::Zero || k == ConeKind1D::FullLine;
}

inline Eigen::VectorXd cone_project_vec(const std::vector<ConeKind1D>& kinds,
                                        const Eigen::VectorXd& x) {
    Eigen::VectorXd y(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i)
        y[i] = cone_project(kinds[static_cast<std::size_t>(i)], x[i]);
    return y;
}

/// Exact solve when both cones are coordinate subspaces.  Restricting w to
/// the free domain coordinates F and noting that only the Zero-range rows R
/// contribute to the distance, the problem becomes the smallest singular
/// value of the R x F block of A.
inline ConeMinResult subspace_cone_min(const Eigen::MatrixXd& A,
                                       const std::vector<ConeKind1D>& domain,
                                       const std::vector<ConeKind1D>& range) {
    ConeMinResult r;
    r.exact = true;

    std::vector<Eigen::Index> free_cols;
    for (std::size_t j = 0; j < domain.size(); ++j)
        if (domain[j] == ConeKind1D::FullLine) free_cols.push_back(static_cast<Eigen::Index>(j));
    if (free_cols.empty()) {
        r.lower = r.upper = kInf;  // only w = 0 is admissible: empty feasible set
        return r;
    }

    std::vector<Eigen::Index> pinned_rows;
    for (std::size_t i = 0; i < range.size(); ++i)
        if (range[i] == ConeKind1D::Zero) pinned_rows.push_back(static_cast<Eigen::Index>(i));

    const auto nf = static_cast<Eigen::Index>(free_cols.size());
    if (pinned_rows.empty()) {
        // Every row direction is free, so dist(Aw, C) = 0 for any w.
        r.lower = r.upper = 0.0;
        r.witness = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(domain.size()));
        r.witness[free_cols[0]] = 1.0;
        return r;
    }

    const auto nr = static_cast<Eigen::Index>(pinned_rows.size());
    Eigen::MatrixXd B(nr, nf);
    for (Eigen::Index i = 0; i < nr; ++i)
        for (Eigen::Index j = 0; j < nf; ++j) B(i, j) = A(pinned_rows[i], free_cols[j]);

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(B, Eigen::ComputeFullV);
    const double value = (nf > nr) ? 0.0 : svd.singularValues()(nf - 1);
    // The last column of the full V factor spans the least-stretched (or
    // kernel) direction in either shape regime.
    Eigen::VectorXd dir = svd.matrixV().col(nf - 1);

    r.lower = r.upper = value;
    r.witness = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(domain.size()));
    for (Eigen::Index j = 0; j < nf; ++j) r.witness[free_cols[j]] = dir[j];
    return r;
}

}  // namespace detail

inline ConeMinResult cone_constrained_min(const Eigen::MatrixXd& A,
                                          const std::vector<ConeKind1D>& domain,
                                          const std::vector<ConeKind1D>& range,
                                          const ConeMinOptions& opts = {}) {
    if (static_cast<Eigen::Index>(domain.size()) != A.cols() ||
        static_cast<Eigen::Index>(range.size()) != A.rows())
        throw numeric_error("cone_constrained_min: cone sizes do not match the matrix");

    bool domain_has_dir = false;
    for (ConeKind1D k : domain) {
        if (k == ConeKind1D::Empty) {
            ConeMinResult r;
            r.lower = r.upper = kInf;
            r.exact = true;
            return r;
        }
        if (k != ConeKind1D::Zero) domain_has_dir = true;
    }
    if (!domain_has_dir) {
        ConeMinResult r;  // only the zero vector lies in K: no unit vectors
        r.lower = r.upper = kInf;
        r.exact = true;
        return r;
    }
    for (ConeKind1D k : range)
        if (k == ConeKind1D::Empty) {
            ConeMinResult r;  // distance to an empty set is +inf for every w
            r.lower = r.upper = kInf;
            r.exact = true;
            return r;
        }

    bool subspace = true;
    for (ConeKind1D k : domain) subspace = subspace && detail::is_subspace_kind(k);
    for (ConeKind1D k : range) subspace = subspace && detail::is_subspace_kind(k);
    if (subspace) return detail::subspace_cone_min(A, domain, range);

    // Lower bound: relaxing every half-line to the full line only enlarges K
    // and shrinks the distance (C grows), so the relaxed subspace value is a
    // certified lower bound.
    auto relax = [](const std::vector<ConeKind1D>& kinds) {
        std::vector<ConeKind1D> out(kinds.size());
        for (std::size_t i = 0; i < kinds.size(); ++i)
            out[i] = detail::is_subspace_kind(kinds[i]) ? kinds[i] : ConeKind1D::FullLine;
        return out;
    };
    ConeMinResult relaxed = detail::subspace_cone_min(A, relax(domain), relax(range));

    ConeMinResult r;
    r.exact = false;
    r.lower = relaxed.lower;

    // Upper bound: multistart projected descent on F(w) = 0.5 dist(Aw, C)^2
    // over the unit sphere intersected with K.  grad F = A^T (Aw - P_C(Aw)).
    const auto n = A.cols();
    auto dist_to_range = [&](const Eigen::VectorXd& y) {
        return (y - detail::cone_project_vec(range, y)).norm();
    };
    for (int s = 0; s < opts.starts; ++s) {
        Rng rng(opts.seed + static_cast<std::uint64_t>(s));
        Eigen::VectorXd w(n);
        bool ok = false;
        for (int attempt = 0; attempt < 8 && !ok; ++attempt) {
            for (Eigen::Index i = 0; i < n; ++i) w[i] = rng.normal();
            w = detail::cone_project_vec(domain, w);
            ok = w.norm() > 1e-12;
        }
        if (!ok) continue;
        w /= w.norm();

        double f = dist_to_range(A * w);
        if (f < r.upper) {
            r.upper = f;
            r.witness = w;
        }
        double step = 1.0;
        for (int it = 0; it < opts.iters; ++it) {
            const Eigen::VectorXd Aw = A * w;
            const Eigen::VectorXd grad = A.transpose() * (Aw - detail::cone_project_vec(range, Aw));
            if (grad.norm() <= 1e-14) break;
            bool moved = false;
            while (step >= 1e-16) {
                Eigen::VectorXd cand = detail::cone_project_vec(domain, w - step * grad);
                const double cn = cand.norm();
                if (cn > 1e-12) {
                    cand /= cn;
                    const double fc = dist_to_range(A * cand);
                    if (fc <= f) {
                        w = cand;
                        f = fc;
                        step = std::min(step * 1.3, 1e3);
                        moved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if (!moved) break;
            if (f < r.upper) {
                r.upper = f;
                r.witness = w;
            }
        }
    }
    // The relaxation can only under-shoot; guard against float dust pushing
    // it a hair above the witnessed value.
    r.lower = std::min(r.lower, r.upper);
    return r;
}

}  // namespace varcert
