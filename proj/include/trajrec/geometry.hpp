#pragma once

// Signed distances, contact normals and boundary sampling for the scene
// primitives (cuboids and the hand cylinder), plus the ray intersections used
// by the hard rasterizer. Everything except the ray casts is templated on the
// scalar type so gradients flow through poses and sizes.

#include <algorithm>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "trajrec/types.hpp"

namespace trajrec {

template <class S>
struct CuboidT {
  Vec3T<S> pos;
  Mat3T<S> rot = Mat3T<S>::identity();
  Vec3T<S> size{S(1.0), S(1.0), S(1.0)};  // full edge lengths
};

using Cuboid = CuboidT<double>;

template <class S>
CuboidT<S> object_cuboid(const SceneStateT<S>& s) {
  return {s.obj_pos, s.obj_rot, s.obj_size};
}

template <class S>
CuboidT<S> static_cuboid(const SceneStateT<S>& s) {
  return {s.static_pos, rotation_about_z_t(s.static_yaw), s.static_size};
}

// Exact box SDF evaluated in the cuboid's local frame. Negative inside equals
// minus the smallest distance to a face.
template <class S>
S sdf_cuboid(const Vec3T<S>& p, const CuboidT<S>& c) {
  using std::abs;
  using std::max;
  using std::min;
  using std::sqrt;
  const Vec3T<S> q = c.rot.transpose() * (p - c.pos);
  const S dx = abs(q.x) - c.size.x * S(0.5);
  const S dy = abs(q.y) - c.size.y * S(0.5);
  const S dz = abs(q.z) - c.size.z * S(0.5);
  if (value_of(dx) < 0.0 && value_of(dy) < 0.0 && value_of(dz) < 0.0)
    return max(dx, max(dy, dz));
  const S ox = max(dx, S(0.0));
  const S oy = max(dy, S(0.0));
  const S oz = max(dz, S(0.0));
  return sqrt(ox * ox + oy * oy + oz * oz) + min(max(dx, max(dy, dz)), S(0.0));
}

// Ground plane z = 0; signed distance is just the height.
template <class S>
S sdf_halfspace_ground(const Vec3T<S>& p) {
  return p.z;
}

template <class S>
S hand_tip_object_distance(const SceneStateT<S>& state, const HandGeometry& geom) {
  const Vec3T<S> tip = hand_tip(state.hand_pos, state.hand_rot, geom);
  return sdf_cuboid(tip, object_cuboid(state));
}

inline Vec3 ground_normal() { return {0.0, 0.0, 1.0}; }

// Outward unit normal of the cuboid surface point closest to p. Inside (and
// on the boundary) this is the normal of the nearest face; outside it is the
// normalized SDF gradient.
template <class S>
Vec3T<S> contact_normal_cuboid(const Vec3T<S>& p, const CuboidT<S>& c) {
  using std::abs;
  using std::max;
  using std::sqrt;
  const Vec3T<S> q = c.rot.transpose() * (p - c.pos);
  const double qn = value_of(squared_norm(q));
  if (qn < 1e-24) return {S(0.0), S(0.0), S(1.0)};

  const S dx = abs(q.x) - c.size.x * S(0.5);
  const S dy = abs(q.y) - c.size.y * S(0.5);
  const S dz = abs(q.z) - c.size.z * S(0.5);
  const double dxv = value_of(dx), dyv = value_of(dy), dzv = value_of(dz);

  Vec3T<S> n_local;
  if (dxv < 0.0 && dyv < 0.0 && dzv < 0.0) {
    // Inside: nearest face, ties resolved to the first axis.
    int axis = 0;
    double best = dxv;
    if (dyv > best) { best = dyv; axis = 1; }
    if (dzv > best) { axis = 2; }
    n_local[axis] = value_of(q[axis]) >= 0.0 ? S(1.0) : S(-1.0);
  } else {
    const S ox = max(dx, S(0.0));
    const S oy = max(dy, S(0.0));
    const S oz = max(dz, S(0.0));
    n_local = {value_of(q.x) >= 0.0 ? ox : -ox, value_of(q.y) >= 0.0 ? oy : -oy,
               value_of(q.z) >= 0.0 ? oz : -oz};
    n_local = n_local / norm(n_local);
  }
  return c.rot * n_local;
}

// Deterministic boundary sample offsets on the unit cube surface, expressed
// as fractions of the edge lengths in [-1/2, 1/2]^3. The 8 corners come
// first, then the 12 edge midpoints, then the 6 face centers, then 24
// edge quarter points.
inline std::vector<Vec3> boundary_offsets(int count) {
  if (count < 8) throw std::invalid_argument("boundary_offsets: need at least 8 points");
  std::vector<Vec3> pts;
  pts.reserve(count);
  const double h = 0.5;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1}) pts.push_back({sx * h, sy * h, sz * h});

  auto edge_points = [&](double frac) {
    // 4 edges along each axis at the given interpolation fraction.
    for (int sa : {-1, 1})
      for (int sb : {-1, 1}) {
        pts.push_back({-h + frac, sa * h, sb * h});
        pts.push_back({sa * h, -h + frac, sb * h});
        pts.push_back({sa * h, sb * h, -h + frac});
      }
  };
  if (static_cast<int>(pts.size()) < count) edge_points(0.5);
  if (static_cast<int>(pts.size()) < count) {
    for (int s : {-1, 1}) {
      pts.push_back({s * h, 0.0, 0.0});
      pts.push_back({0.0, s * h, 0.0});
      pts.push_back({0.0, 0.0, s * h});
    }
  }
  if (static_cast<int>(pts.size()) < count) edge_points(0.25);
  if (static_cast<int>(pts.size()) < count) edge_points(0.75);
  if (static_cast<int>(pts.size()) < count)
    throw std::invalid_argument("boundary_offsets: more points than the sampling scheme provides");
  pts.resize(count);
  return pts;
}

// World-frame boundary point: position, center offset and velocity from the
// rigid-body rates, v_i = v + w x q_i.
template <class S>
struct BoundaryPointT {
  Vec3T<S> position;
  Vec3T<S> offset;  // world-frame vector from the object center
  Vec3T<S> velocity;
};

using BoundaryPoint = BoundaryPointT<double>;

template <class S>
BoundaryPointT<S> boundary_point_world(const CuboidT<S>& c, const Vec3& unit_offset,
                                       const Vec3T<S>& lin_vel, const Vec3T<S>& ang_vel) {
  const Vec3T<S> local{c.size.x * S(unit_offset.x), c.size.y * S(unit_offset.y),
                       c.size.z * S(unit_offset.z)};
  BoundaryPointT<S> out;
  out.offset = c.rot * local;
  out.position = c.pos + out.offset;
  out.velocity = lin_vel + cross(ang_vel, out.offset);
  return out;
}

// --- ray casts (double only, used by the occlusion-aware rasterizer) ---

// Returns the smallest t >= 0 with origin + t*dir inside the cuboid.
inline std::optional<double> ray_cuboid(const Vec3& origin, const Vec3& dir,
                                        const Cuboid& c) {
  const Vec3 o = c.rot.transpose() * (origin - c.pos);
  const Vec3 d = c.rot.transpose() * dir;
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    const double half = c.size[i] / 2.0;
    if (std::abs(d[i]) < 1e-12) {
      if (o[i] < -half || o[i] > half) return std::nullopt;
      continue;
    }
    double ta = (-half - o[i]) / d[i];
    double tb = (half - o[i]) / d[i];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  return t0;
}

// Finite closed cylinder centered at `center` with unit axis `axis`.
inline std::optional<double> ray_cylinder(const Vec3& origin, const Vec3& dir,
                                          const Vec3& center, const Vec3& axis,
                                          double half_length, double radius) {
  const Vec3 oc = origin - center;
  const Vec3 d_perp = dir - axis * dot(dir, axis);
  const Vec3 o_perp = oc - axis * dot(oc, axis);
  double best = std::numeric_limits<double>::infinity();

  const double a = squared_norm(d_perp);
  if (a > 1e-14) {
    const double b = 2.0 * dot(o_perp, d_perp);
    const double cq = squared_norm(o_perp) - radius * radius;
    const double disc = b * b - 4.0 * a * cq;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
        if (t < 0.0) continue;
        const double axial = dot(oc + dir * t, axis);
        if (std::abs(axial) <= half_length) best = std::min(best, t);
      }
    }
  }
  // End caps.
  const double dir_axial = dot(dir, axis);
  if (std::abs(dir_axial) > 1e-12) {
    for (double s : {-half_length, half_length}) {
      const double t = (s - dot(oc, axis)) / dir_axial;
      if (t < 0.0) continue;
      const Vec3 p = oc + dir * t;
      if (squared_norm(p - axis * dot(p, axis)) <= radius * radius)
        best = std::min(best, t);
    }
  }
  if (!std::isfinite(best)) return std::nullopt;
  // Origin inside the solid counts as a hit at t = 0.
  if (squared_norm(o_perp) <= radius * radius && std::abs(dot(oc, axis)) <= half_length)
    best = 0.0;
  return best;
}

}  // namespace trajrec
