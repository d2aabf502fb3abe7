#ifndef SMAT_BOX_HPP
#define SMAT_BOX_HPP

#include "smat/geometry.hpp"

#include <algorithm>
#include <limits>

namespace smat {

/// Axis-aligned box in the world frame.
struct BoundingBox {
  Point3 min = Point3::Zero();
  Point3 max = Point3::Zero();

  static BoundingBox from_center(const Point3& c, const Point3& size) { return {c - 0.5 * size, c + 0.5 * size}; }

  /// Tight box around `points`; an empty span yields a degenerate box at the origin.
  static BoundingBox around(std::span<const Point3> points) {
    if (points.empty()) return {};
    BoundingBox b{points.front(), points.front()};
    for (const auto& p : points) b.expand(p);
    return b;
  }

  void expand(const Point3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }

  bool valid() const { return (min.array() <= max.array()).all() && is_finite(min) && is_finite(max); }
  Point3 center() const { return 0.5 * (min + max); }
  Point3 size() const { return max - min; }
  double volume() const {
    const Point3 s = (max - min).cwiseMax(Point3::Zero());
    return s.x() * s.y() * s.z();
  }

  BoundingBox translated(const Point3& d) const { return {min + d, max + d}; }

  /// Closed containment test.
  bool contains(const Point3& p) const { return (p.array() >= min.array()).all() && (p.array() <= max.array()).all(); }

  /// Open-interior overlap: boxes that only touch do not overlap.
  bool overlaps(const BoundingBox& o) const {
    return (min.array() < o.max.array()).all() && (o.min.array() < max.array()).all();
  }

  double intersection_volume(const BoundingBox& o) const {
    const Point3 lo = min.cwiseMax(o.min);
    const Point3 hi = max.cwiseMin(o.max);
    const Point3 s = (hi - lo).cwiseMax(Point3::Zero());
    return s.x() * s.y() * s.z();
  }

  /// Slab test. Returns the entry distance along `dir` within [0, t_max];
  /// 0 when the origin is inside the box.
  std::optional<double> ray_hit(const Point3& origin, const Point3& dir, double t_max) const {
    double t0 = 0.0;
    double t1 = t_max;
    for (int a = 0; a < 3; ++a) {
      if (dir[a] == 0.0) {
        if (origin[a] < min[a] || origin[a] > max[a]) return std::nullopt;
        continue;
      }
      const double inv = 1.0 / dir[a];
      double tn = (min[a] - origin[a]) * inv;
      double tf = (max[a] - origin[a]) * inv;
      if (tn > tf) std::swap(tn, tf);
      t0 = std::max(t0, tn);
      t1 = std::min(t1, tf);
      if (t0 > t1) return std::nullopt;
    }
    return t0;
  }

  friend bool operator==(const BoundingBox& a, const BoundingBox& b) { return a.min == b.min && a.max == b.max; }
};

/// Axis-aligned volume IoU; 0 when the union is empty.
inline double iou_3d(const BoundingBox& a, const BoundingBox& b) {
  const double inter = a.intersection_volume(b);
  const double uni = a.volume() + b.volume() - inter;
  if (!(uni > 0.0)) return a == b ? 1.0 : 0.0;
  return inter / uni;
}

}  // namespace smat

#endif  // SMAT_BOX_HPP
