#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "varcert/derivative_oracle.hpp"
#include "varcert/integrands.hpp"
#include "varcert/sets.hpp"

namespace varcert {

// Catalog of probe points covering every analytic case branch of every
// integrand kind, plus the two-sided agreement check between the case
// formulas and the difference-quotient oracle. The CLI front end runs these
// directly; the test suite keeps its own frozen copy of the expectations.

struct DerivativeCase {
    IntegrandSpec spec;
    double z, zeta, dz;
    std::size_t node;
};

inline std::vector<DerivativeCase> derivative_case_catalog() {
    std::vector<DerivativeCase> rows;
    auto add = [&](const IntegrandSpec& s, double z, double zeta, double dz) {
        const std::size_t node = s.lo_field.empty() && s.weight_field.empty() ? 0 : 1;
        rows.push_back({s, z, zeta, dz, node});
    };
    for (double alpha : {1.0, 2.0}) {
        const auto q = IntegrandSpec::squared_two_norm(alpha);
        add(q, 1.0, alpha * 1.0, 0.4);
        add(q, -0.7, alpha * -0.7, 0.0);
        add(q, 0.0, 0.0, 1.0);
    }
    for (auto [lo, hi] : std::vector<std::pair<double, double>>{{-1.0, 1.0}, {0.25, 1.75}}) {
        const auto ind = IntegrandSpec::indicator_interval(lo, hi);
        add(ind, hi, 0.5, 0.0);   // active multiplier, tangential direction
        add(ind, hi, 0.0, 0.0);   // boundary ray
        add(ind, hi, 0.0, -0.3);  // moving inward
        add(ind, hi, 0.0, 0.3);   // inadmissible direction
        add(ind, lo, -0.5, 0.0);
        add(ind, lo, 0.0, 0.0);
        add(ind, lo, 0.0, 0.3);
        const double mid = 0.5 * (lo + hi);
        add(ind, mid, 0.0, 0.3);
        add(ind, mid, 0.0, 0.0);
        add(ind, mid, 0.0, -5.0);
    }
    for (double delta : {1.0, 0.7}) {
        const auto w = IntegrandSpec::weighted_abs(delta);
        add(w, 2.0, delta, 0.7);
        add(w, -0.5, -delta, 0.2);
        add(w, 0.0, delta, 1.0);
        add(w, 0.0, delta, 0.0);
        add(w, 0.0, delta, -1.0);
        add(w, 0.0, -delta, 0.0);
        add(w, 0.0, -delta, -2.0);
        add(w, 0.0, 0.25 * delta, 0.0);
        add(w, 0.0, 0.25 * delta, 0.4);
    }
    for (double gamma : {0.5, 0.25}) {
        const auto my =
            IntegrandSpec::moreau_yosida(IntegrandSpec::indicator_interval(-1.0, 1.0), gamma);
        add(my, 1.0, gamma, 0.0);
        add(my, 1.0, gamma, -0.4);
        add(my, 1.0, gamma + 1.0, 0.0);
        add(my, 0.3, gamma * 0.3, 0.6);
        const auto mya = IntegrandSpec::moreau_yosida(IntegrandSpec::weighted_abs(1.0), gamma);
        add(mya, 0.0, 1.0, 0.0);
        add(mya, 0.0, 1.0, 2.0);
        add(mya, 2.0, 1.0 + 2.0 * gamma, 1.0);
        add(mya, 0.0, 0.3, 0.0);
        add(mya, -1.5, -1.0 - 1.5 * gamma, -0.2);
    }
    // Spatially varying parameters exercise the per-node lookups.
    {
        IntegrandSpec vind = IntegrandSpec::indicator_interval(
            std::vector<double>{-1.0, 0.25}, std::vector<double>{1.0, 1.75});
        rows.push_back({vind, 1.75, 0.0, 0.0, 1});
        IntegrandSpec vabs = IntegrandSpec::weighted_abs(std::vector<double>{1.0, 2.5});
        rows.push_back({vabs, 0.0, 2.5, 0.0, 1});
    }
    return rows;
}

struct CaseCheckResult {
    bool pass = true;
    std::string label;
    std::string detail;  // first disagreement, empty when passing
};

/// Two-sided agreement between the case formula and the difference-quotient
/// oracle: every persistent quotient sample must lie in the predicted set
/// for its probe direction, and every extreme point of the prediction at the
/// requested direction must be witnessed by a sample. `predicted_zeta_shift`
/// is a fault-injection hook: it offsets the multiplier fed to the formula
/// (not the oracle), so a nonzero shift must be caught as a disagreement.
inline CaseCheckResult check_derivative_case(const DerivativeCase& bc,
                                             double predicted_zeta_shift = 0.0,
                                             const OracleOptions& opts = {}) {
    CaseCheckResult out;
    {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s z=%g zeta=%g dz=%g", bc.spec.kind_name(), bc.z,
                      bc.zeta, bc.dz);
        out.label = buf;
    }
    const double tol_set = 1e-6 * (1.0 + opts.window);
    const OracleSamples samples =
        oracle_graph_derivative(bc.spec, bc.z, bc.zeta, bc.dz, bc.node, opts);

    for (const auto& grp : samples.groups) {
        const SetDescriptor1D pred = graph_derivative(bc.spec, bc.z, bc.zeta + predicted_zeta_shift,
                                                      grp.dz_used, bc.node);
        for (double s : grp.values) {
            if (pred.dist(s) > tol_set) {
                char buf[200];
                std::snprintf(buf, sizeof buf,
                              "oracle sample %.9g (direction %.9g) misses the predicted set %s",
                              s, grp.dz_used, pred.describe().c_str());
                out.pass = false;
                out.detail = buf;
                return out;
            }
        }
    }

    const SetDescriptor1D predc =
        graph_derivative(bc.spec, bc.z, bc.zeta + predicted_zeta_shift, bc.dz, bc.node);
    const auto& center = samples.groups[static_cast<std::size_t>(opts.probe_count / 2)];
    for (double p : predc.probe_points(opts.window)) {
        double best = kInf;
        for (double s : center.values) best = std::min(best, std::abs(s - p));
        if (best > tol_set) {
            char buf[200];
            std::snprintf(buf, sizeof buf,
                          "extreme point %.9g of the predicted set %s has no oracle witness", p,
                          predc.describe().c_str());
            out.pass = false;
            out.detail = buf;
            return out;
        }
    }
    if (predc.is_empty() && !center.values.empty()) {
        out.pass = false;
        out.detail = "formula predicts an empty set but the oracle found samples";
    }
    return out;
}

}  // namespace varcert
