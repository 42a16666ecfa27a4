#pragma once

#include "sylva/common.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>

namespace sylva {

template <typename Scalar>
struct Triangle3 {
  Vector3<Scalar> a, b, c;

  Vector3<Scalar> centroid() const { return (a + b + c) / Scalar(3); }
  Scalar area() const { return Scalar(0.5) * (b - a).cross(c - a).norm(); }
};

using Triangle = Triangle3<double>;

// Separating-axis triangle/box overlap (Akenine-Moller). The box is closed;
// `center` and `half` describe it. Returns true on touching contact.
template <typename Scalar>
bool triangle_box_overlap(const Vector3<Scalar>& center, const Vector3<Scalar>& half,
                          const Triangle3<Scalar>& tri) {
  const Vector3<Scalar> v0 = tri.a - center;
  const Vector3<Scalar> v1 = tri.b - center;
  const Vector3<Scalar> v2 = tri.c - center;
  const std::array<Vector3<Scalar>, 3> edges{v1 - v0, v2 - v1, v0 - v2};

  // 9 cross-product axes: edge x unit axis.
  for (const auto& e : edges) {
    for (int axis = 0; axis < 3; ++axis) {
      Vector3<Scalar> l = Vector3<Scalar>::Zero();
      l[axis] = Scalar(1);
      const Vector3<Scalar> n = l.cross(e);
      const Scalar p0 = n.dot(v0), p1 = n.dot(v1), p2 = n.dot(v2);
      const Scalar r = half.cwiseProduct(n.cwiseAbs()).sum();
      if (std::min({p0, p1, p2}) > r || std::max({p0, p1, p2}) < -r) return false;
    }
  }
  // Box face normals.
  for (int axis = 0; axis < 3; ++axis) {
    const Scalar lo = std::min({v0[axis], v1[axis], v2[axis]});
    const Scalar hi = std::max({v0[axis], v1[axis], v2[axis]});
    if (lo > half[axis] || hi < -half[axis]) return false;
  }
  // Triangle plane.
  const Vector3<Scalar> normal = edges[0].cross(edges[1]);
  const Scalar d = normal.dot(v0);
  const Scalar r = half.cwiseProduct(normal.cwiseAbs()).sum();
  return std::abs(d) <= r;
}

/// Slab test. Returns the parametric [t_enter, t_exit] of the ray inside the
/// closed box, or nothing if the ray misses it.
template <typename Scalar>
std::optional<std::pair<Scalar, Scalar>> ray_box(const Vector3<Scalar>& origin,
                                                 const Vector3<Scalar>& dir,
                                                 const Vector3<Scalar>& lo,
                                                 const Vector3<Scalar>& hi) {
  Scalar t0 = Scalar(0);
  Scalar t1 = std::numeric_limits<Scalar>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    if (dir[axis] == Scalar(0)) {
      if (origin[axis] < lo[axis] || origin[axis] > hi[axis]) return std::nullopt;
      continue;
    }
    const Scalar inv = Scalar(1) / dir[axis];
    Scalar ta = (lo[axis] - origin[axis]) * inv;
    Scalar tb = (hi[axis] - origin[axis]) * inv;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  return std::make_pair(t0, t1);
}

/// Rotation about +z by `yaw` radians.
template <typename Scalar>
Vector3<Scalar> rotate_yaw(const Vector3<Scalar>& v, Scalar yaw) {
  const Scalar c = std::cos(yaw), s = std::sin(yaw);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y(), v.z()};
}

}  // namespace sylva
