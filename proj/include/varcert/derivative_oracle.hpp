#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "varcert/integrands.hpp"
#include "varcert/sets.hpp"

namespace varcert {

/// Options for the difference-quotient sampler. Defaults follow the
/// verification protocol: dyadic step ladder 2^-4 .. 2^-20, nine probe
/// directions spaced 1e-3 around the requested one, window [-M, M].
struct OracleOptions {
    double window = 10.0;        // M
    int t_exp_min = 4, t_exp_max = 20;
    int probe_count = 9;
    double probe_spacing = 1e-3;
    int grid_points = 33;        // samples per fat quotient set
    int persist_levels = 4;      // a value must survive this many finest steps
    double tol_persist = 1e-7;
};

/// Samples of the difference quotients (df(z + t dz~) - zeta)/t, grouped by
/// the probe direction dz~ they came from. Each group's values are
/// accumulation points: they persisted across the finest step sizes.
struct OracleSamples {
    struct Group {
        double dz_used;
        std::vector<double> values;
    };
    std::vector<Group> groups;
};

namespace detail {

/// (S - zeta)/t clipped to [-M, M]. Every descriptor is a connected set, so
/// the result is a closed interval (or nothing).
inline std::optional<std::pair<double, double>> quotient_interval(const SetDescriptor1D& S,
                                                                  double zeta, double t,
                                                                  double M) {
    using K = SetDescriptor1D::Kind;
    double lo, hi;
    switch (S.kind) {
        case K::Empty: return std::nullopt;
        case K::SinglePoint: lo = hi = (S.base - zeta) / t; break;
        case K::Interval: lo = (S.lo - zeta) / t; hi = (S.hi - zeta) / t; break;
        case K::FullLine: lo = -M; hi = M; break;
        case K::AffineCone: {
            const double b = (S.base - zeta) / t;
            if (S.cone == ConeKind1D::HalfLineNonneg) { lo = b; hi = M; }
            else { lo = -M; hi = b; }
            break;
        }
        default: return std::nullopt;
    }
    lo = std::max(lo, -M);
    hi = std::min(hi, M);
    if (lo > hi) return std::nullopt;
    return std::make_pair(lo, hi);
}

inline double interval_dist(double p, const std::pair<double, double>& iv) {
    if (p < iv.first) return iv.first - p;
    if (p > iv.second) return p - iv.second;
    return 0.0;
}

} // namespace detail

/// Independent oracle for the graph derivative: walks the step ladder,
/// collects difference quotients of the subdifferential map, and keeps the
/// values that persist as t -> 0. Uses exact case classification (tol = 0)
/// because probe points are exact arithmetic perturbations.
///
/// Deliberately built on subdiff alone — it shares no code with
/// graph_derivative, so agreement between the two is meaningful evidence.
inline OracleSamples oracle_graph_derivative(const IntegrandSpec& f, double z, double zeta,
                                             double dz, std::size_t node = 0,
                                             const OracleOptions& opts = {}) {
    OracleSamples out;
    const int n_levels = opts.t_exp_max - opts.t_exp_min + 1;
    const int half = opts.probe_count / 2;
    for (int j = 0; j < opts.probe_count; ++j) {
        const double dz_used = dz + (j - half) * opts.probe_spacing;
        // Quotient interval per ladder level, finest last.
        std::vector<std::optional<std::pair<double, double>>> q(n_levels);
        for (int k = 0; k < n_levels; ++k) {
            const double t = std::ldexp(1.0, -(opts.t_exp_min + k));
            const SetDescriptor1D S = subdiff(f, z + t * dz_used, node, 0.0);
            q[k] = detail::quotient_interval(S, zeta, t, opts.window);
        }
        OracleSamples::Group grp;
        grp.dz_used = dz_used;
        const auto& fin = q[n_levels - 1];
        if (fin) {
            // Candidate points: endpoints plus an even grid across the set.
            std::vector<double> cand;
            if (fin->second - fin->first <= 0.0) {
                cand.push_back(fin->first);
            } else {
                for (int g = 0; g < opts.grid_points; ++g)
                    cand.push_back(fin->first + (fin->second - fin->first) * g /
                                                    (opts.grid_points - 1));
            }
            for (double p : cand) {
                bool persists = true;
                for (int k = n_levels - opts.persist_levels; k < n_levels && persists; ++k) {
                    if (k < 0) continue;
                    if (!q[k] || detail::interval_dist(p, *q[k]) > opts.tol_persist)
                        persists = false;
                }
                if (persists) grp.values.push_back(p);
            }
        }
        out.groups.push_back(std::move(grp));
    }
    return out;
}

} // namespace varcert
