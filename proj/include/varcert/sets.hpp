#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "varcert/errors.hpp"
#include "varcert/grid.hpp"

namespace varcert {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// The five closed convex cones of the real line that arise pointwise
/// (plus the empty set as an explicit marker).
enum class ConeKind1D { Empty, Zero, HalfLineNonneg, HalfLineNonpos, FullLine };

inline const char* cone_kind_name(ConeKind1D k) {
    switch (k) {
        case ConeKind1D::Empty: return "Empty";
        case ConeKind1D::Zero: return "Zero";
        case ConeKind1D::HalfLineNonneg: return "HalfLineNonneg";
        case ConeKind1D::HalfLineNonpos: return "HalfLineNonpos";
        case ConeKind1D::FullLine: return "FullLine";
    }
    return "?";
}

/// Half-line pointing in the direction of sign s (s != 0).
inline ConeKind1D halfline_from_sign(double s) {
    return s > 0 ? ConeKind1D::HalfLineNonneg : ConeKind1D::HalfLineNonpos;
}

inline bool cone_contains(ConeKind1D k, double x, double tol = 0.0) {
    switch (k) {
        case ConeKind1D::Empty: return false;
        case ConeKind1D::Zero: return std::abs(x) <= tol;
        case ConeKind1D::HalfLineNonneg: return x >= -tol;
        case ConeKind1D::HalfLineNonpos: return x <= tol;
        case ConeKind1D::FullLine: return true;
    }
    return false;
}

/// Pointwise polar {s : s*x <= 0 for all x in K}. The polar of the empty set
/// is vacuously the whole line.
inline ConeKind1D cone_polar(ConeKind1D k) {
    switch (k) {
        case ConeKind1D::Empty: return ConeKind1D::FullLine;
        case ConeKind1D::Zero: return ConeKind1D::FullLine;
        case ConeKind1D::HalfLineNonneg: return ConeKind1D::HalfLineNonpos;
        case ConeKind1D::HalfLineNonpos: return ConeKind1D::HalfLineNonneg;
        case ConeKind1D::FullLine: return ConeKind1D::Zero;
    }
    return ConeKind1D::Empty;
}

/// Euclidean projection onto the cone. Undefined for Empty.
inline double cone_project(ConeKind1D k, double x) {
    switch (k) {
        case ConeKind1D::Zero: return 0.0;
        case ConeKind1D::HalfLineNonneg: return std::max(0.0, x);
        case ConeKind1D::HalfLineNonpos: return std::min(0.0, x);
        case ConeKind1D::FullLine: return x;
        case ConeKind1D::Empty: throw numeric_error("projection onto the empty set");
    }
    return 0.0;
}

inline double cone_dist(ConeKind1D k, double x) {
    if (k == ConeKind1D::Empty) return kInf;
    return std::abs(x - cone_project(k, x));
}

/// One node's set in a pointwise set-valued result. Derivative and
/// subdifferential case formulas only ever produce: the empty set, a single
/// point, a translated cone (base + cone), the full line, or a bounded
/// interval (subdifferentials of weighted absolute values at zero).
struct SetDescriptor1D {
    enum class Kind { Empty, SinglePoint, AffineCone, FullLine, Interval };

    Kind kind = Kind::Empty;
    double base = 0.0;            // SinglePoint value / AffineCone offset
    double lo = 0.0, hi = 0.0;    // Interval bounds
    ConeKind1D cone = ConeKind1D::Zero; // AffineCone direction

    static SetDescriptor1D empty() { return {}; }

    static SetDescriptor1D single_point(double v) {
        SetDescriptor1D s;
        s.kind = Kind::SinglePoint;
        s.base = v;
        return s;
    }

    static SetDescriptor1D full_line() {
        SetDescriptor1D s;
        s.kind = Kind::FullLine;
        return s;
    }

    static SetDescriptor1D interval(double lo, double hi) {
        SetDescriptor1D s;
        s.kind = Kind::Interval;
        s.lo = lo;
        s.hi = hi;
        return s;
    }

    /// base + cone, normalized: a Zero cone collapses to the single point,
    /// a FullLine cone to the whole line, an Empty cone to the empty set.
    static SetDescriptor1D affine_cone(double base, ConeKind1D k) {
        switch (k) {
            case ConeKind1D::Empty: return empty();
            case ConeKind1D::Zero: return single_point(base);
            case ConeKind1D::FullLine: return full_line();
            default: break;
        }
        SetDescriptor1D s;
        s.kind = Kind::AffineCone;
        s.base = base;
        s.cone = k;
        return s;
    }

    /// Translate the whole set by t (used by Moreau-Yosida shifts).
    SetDescriptor1D shifted(double t) const {
        SetDescriptor1D s = *this;
        switch (kind) {
            case Kind::Empty:
            case Kind::FullLine: return s;
            case Kind::SinglePoint:
            case Kind::AffineCone: s.base += t; return s;
            case Kind::Interval: s.lo += t; s.hi += t; return s;
        }
        return s;
    }

    bool is_empty() const noexcept { return kind == Kind::Empty; }

    bool contains(double x, double tol = 0.0) const {
        switch (kind) {
            case Kind::Empty: return false;
            case Kind::SinglePoint: return std::abs(x - base) <= tol;
            case Kind::FullLine: return true;
            case Kind::Interval: return x >= lo - tol && x <= hi + tol;
            case Kind::AffineCone: return cone_contains(cone, x - base, tol);
        }
        return false;
    }

    double dist(double x) const {
        switch (kind) {
            case Kind::Empty: return kInf;
            case Kind::SinglePoint: return std::abs(x - base);
            case Kind::FullLine: return 0.0;
            case Kind::Interval: return x < lo ? lo - x : (x > hi ? x - hi : 0.0);
            case Kind::AffineCone: return cone_dist(cone, x - base);
        }
        return kInf;
    }

    /// Extreme points of the set clipped to [-M, M]: endpoints of the clipped
    /// segment. Used by two-sided agreement tests (each returned point must
    /// be witnessed by an oracle sample).
    std::vector<double> probe_points(double M) const {
        switch (kind) {
            case Kind::Empty: return {};
            case Kind::SinglePoint:
                return std::abs(base) <= M ? std::vector<double>{base} : std::vector<double>{};
            case Kind::FullLine: return {-M, 0.0, M};
            case Kind::Interval: {
                const double a = std::max(lo, -M), b = std::min(hi, M);
                if (a > b) return {};
                return {a, b};
            }
            case Kind::AffineCone: {
                if (cone == ConeKind1D::HalfLineNonneg) {
                    if (base > M) return {};
                    return {std::max(base, -M), M};
                }
                if (base < -M) return {};
                return {-M, std::min(base, M)};
            }
        }
        return {};
    }

    std::string describe() const {
        char buf[96];
        switch (kind) {
            case Kind::Empty: return "Empty";
            case Kind::SinglePoint:
                std::snprintf(buf, sizeof buf, "Point(%g)", base);
                return buf;
            case Kind::FullLine: return "FullLine";
            case Kind::Interval:
                std::snprintf(buf, sizeof buf, "Interval(%g, %g)", lo, hi);
                return buf;
            case Kind::AffineCone:
                std::snprintf(buf, sizeof buf, "%g + %s", base, cone_kind_name(cone));
                return buf;
        }
        return "?";
    }
};

/// A cone per grid node; the product over nodes is a closed convex cone in
/// the quadrature space. The polar is computed pointwise.
class ConeField {
public:
    ConeField() = default;
    explicit ConeField(const Grid& g, ConeKind1D fill = ConeKind1D::FullLine)
        : grid_(g), kinds_(g.node_count(), fill) {}
    ConeField(const Grid& g, std::vector<ConeKind1D> kinds)
        : grid_(g), kinds_(std::move(kinds)) {
        if (kinds_.size() != g.node_count())
            throw numeric_error("cone field length does not match node count");
    }

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return kinds_.size(); }
    ConeKind1D& operator[](std::size_t i) { return kinds_[i]; }
    ConeKind1D operator[](std::size_t i) const { return kinds_[i]; }
    const std::vector<ConeKind1D>& kinds() const noexcept { return kinds_; }

    ConeField polar() const {
        ConeField p(grid_);
        for (std::size_t i = 0; i < kinds_.size(); ++i) p.kinds_[i] = cone_polar(kinds_[i]);
        return p;
    }

    bool contains(const GridFunction& z, double tol = 0.0) const {
        if (z.grid() != grid_) throw numeric_error("grid mismatch in cone membership");
        for (std::size_t i = 0; i < kinds_.size(); ++i)
            if (!cone_contains(kinds_[i], z[i], tol)) return false;
        return true;
    }

    /// Nodewise Euclidean projection (valid because the cone is a product).
    GridFunction project(const GridFunction& z) const {
        if (z.grid() != grid_) throw numeric_error("grid mismatch in cone projection");
        GridFunction p(grid_);
        for (std::size_t i = 0; i < kinds_.size(); ++i) p[i] = cone_project(kinds_[i], z[i]);
        return p;
    }

    bool any_empty() const noexcept {
        for (auto k : kinds_)
            if (k == ConeKind1D::Empty) return true;
        return false;
    }

    /// True when the only member is the zero function (every node Zero).
    bool is_zero_only() const noexcept {
        for (auto k : kinds_)
            if (k != ConeKind1D::Zero) return false;
        return true;
    }

private:
    Grid grid_{1, 2};
    std::vector<ConeKind1D> kinds_;
};

} // namespace varcert
