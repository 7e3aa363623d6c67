#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include <Eigen/Core>

namespace fracperm {

using Vec2 = Eigen::Vector2d;

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Twice the signed area of (a, b, c); positive for counter-clockwise order.
inline double orient(const Vec2& a, const Vec2& b, const Vec2& c) { return cross(b - a, c - a); }

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 d = b - a;
    const double len2 = d.squaredNorm();
    if (len2 == 0.0) return (p - a).norm();
    const double t = std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
    return (p - (a + t * d)).norm();
}

inline double segment_segment_distance(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    const double o1 = orient(a, b, c), o2 = orient(a, b, d);
    const double o3 = orient(c, d, a), o4 = orient(c, d, b);
    if (((o1 > 0 && o2 < 0) || (o1 < 0 && o2 > 0)) && ((o3 > 0 && o4 < 0) || (o3 < 0 && o4 > 0)))
        return 0.0;
    return std::min({point_segment_distance(a, c, d), point_segment_distance(b, c, d),
                     point_segment_distance(c, a, b), point_segment_distance(d, a, b)});
}

/// Axis-aligned rectangle [xmin, xmax] x [ymin, ymax].
struct Rect {
    double xmin = 0, ymin = 0, xmax = 0, ymax = 0;

    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
    Vec2 center() const { return {0.5 * (xmin + xmax), 0.5 * (ymin + ymax)}; }

    bool contains(const Vec2& p, double tol = 0.0) const {
        return p.x() >= xmin - tol && p.x() <= xmax + tol && p.y() >= ymin - tol && p.y() <= ymax + tol;
    }
    bool strictly_contains(const Rect& r) const {
        return xmin < r.xmin && ymin < r.ymin && xmax > r.xmax && ymax > r.ymax;
    }
    bool operator==(const Rect&) const = default;
};

enum class Side { Left = 0, Right = 1, Bottom = 2, Top = 3 };

inline const char* side_name(Side s) {
    switch (s) {
        case Side::Left: return "left";
        case Side::Right: return "right";
        case Side::Bottom: return "bottom";
        case Side::Top: return "top";
    }
    return "?";
}

/// Bitmask of rectangle sides the point lies on, within `tol`.
inline unsigned sides_touching(const Rect& r, const Vec2& p, double tol) {
    unsigned mask = 0;
    if (!r.contains(p, tol)) return 0;
    if (std::abs(p.x() - r.xmin) <= tol) mask |= 1u << int(Side::Left);
    if (std::abs(p.x() - r.xmax) <= tol) mask |= 1u << int(Side::Right);
    if (std::abs(p.y() - r.ymin) <= tol) mask |= 1u << int(Side::Bottom);
    if (std::abs(p.y() - r.ymax) <= tol) mask |= 1u << int(Side::Top);
    return mask;
}

}  // namespace fracperm
