#pragma once

// Soft-silhouette rasterizer and the mask dIoU distance. Both primitives are
// convex, so a silhouette is the convex hull of projected boundary samples;
// per pixel the soft value is sigmoid(-D/sigma) with D the signed 2D distance
// to that hull. The differentiable path runs the rasterizer and the dIoU
// reduction as one fused tape operation over the projected points, so no
// per-pixel tape nodes are created.

#include <cstdint>
#include <vector>

#include "trajrec/autodiff.hpp"
#include "trajrec/geometry.hpp"
#include "trajrec/linalg.hpp"
#include "trajrec/types.hpp"

namespace trajrec {

struct Mask {
  int width = 0, height = 0;
  std::vector<double> data;  // row-major, values in [0,1]

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0.0) {}

  double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  // Number of pixels in the support (value >= 0.5).
  int support_count() const {
    int n = 0;
    for (double v : data) n += v >= 0.5;
    return n;
  }
};

// The two optimized camera degrees of freedom; intrinsics stay in CameraParams.
template <class S>
struct CameraPoseT {
  S height{0.35};
  S elevation{15.0 * M_PI / 180.0};  // rad, pitch below the horizon
};

using CameraPose = CameraPoseT<double>;

inline CameraPose camera_pose(const CameraParams& c) { return {c.height, c.elevation}; }

template <class S>
struct PixelT {
  S u{0.0}, v{0.0}, depth{0.0};
};

inline double focal_pixels(const CameraParams& c) {
  return 0.5 * c.image_w / std::tan(0.5 * c.fov);
}

// Camera sits at (0, 0, height) looking along +y, pitched down by `elevation`;
// +x maps to image right and world -z to image down, so gravity runs along
// image columns. Pixel (ix, iy) covers [ix, ix+1) x [iy, iy+1); its center is
// (ix + 0.5, iy + 0.5) in (u, v) coordinates.
template <class S>
PixelT<S> project(const Vec3T<S>& p, const CameraPoseT<S>& pose, const CameraParams& intr) {
  using std::cos;
  using std::sin;
  const S se = sin(pose.elevation), ce = cos(pose.elevation);
  const S rel_z = p.z - pose.height;
  const S depth = ce * p.y - se * rel_z;
  if (value_of(depth) <= 1e-4) throw std::domain_error("project: point behind camera");
  const S down = -se * p.y - ce * rel_z;
  const double f = focal_pixels(intr);
  PixelT<S> out;
  out.u = 0.5 * intr.image_w + f * (p.x / depth);
  out.v = 0.5 * intr.image_h + f * (down / depth);
  out.depth = depth;
  return out;
}

inline PixelT<double> project(const Vec3& p, const CameraParams& cam) {
  return project(p, camera_pose(cam), cam);
}

// Boundary samples whose projected convex hull is the silhouette.
template <class S>
std::vector<Vec3T<S>> cuboid_silhouette_points(const CuboidT<S>& c) {
  std::vector<Vec3T<S>> out;
  out.reserve(8);
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1}) {
        const Vec3T<S> local{c.size.x * (0.5 * sx), c.size.y * (0.5 * sy),
                             c.size.z * (0.5 * sz)};
        out.push_back(c.pos + c.rot * local);
      }
  return out;
}

inline constexpr int kCylinderRimSamples = 16;

template <class S>
std::vector<Vec3T<S>> cylinder_silhouette_points(const Vec3T<S>& pos, const Mat3T<S>& rot,
                                                 const HandGeometry& geom) {
  std::vector<Vec3T<S>> out;
  out.reserve(2 * kCylinderRimSamples);
  for (int end : {-1, 1})
    for (int i = 0; i < kCylinderRimSamples; ++i) {
      const double ang = 2.0 * M_PI * i / kCylinderRimSamples;
      const Vec3T<S> local{S(end * geom.length / 2.0), S(geom.radius * std::cos(ang)),
                           S(geom.radius * std::sin(ang))};
      out.push_back(pos + rot * local);
    }
  return out;
}

template <class S>
std::vector<PixelT<S>> project_points(const std::vector<Vec3T<S>>& pts,
                                      const CameraPoseT<S>& pose, const CameraParams& intr) {
  std::vector<PixelT<S>> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(project(p, pose, intr));
  return out;
}

// --- rasterization kernels (plain values) ---

// Serial reference kernel: full-image soft silhouette from projected points.
Mask rasterize_soft_serial(const std::vector<PixelT<double>>& pts, const CameraParams& intr,
                           double sigma);
// OpenMP row-parallel kernel; bit-identical to the serial reference.
Mask rasterize_soft_omp(const std::vector<PixelT<double>>& pts, const CameraParams& intr,
                        double sigma);

// Convenience renderers (full image, OpenMP kernel). A primitive entirely
// behind the camera yields a zero mask; partly behind raises via project.
Mask render_silhouette(const Cuboid& c, const CameraPose& pose, const CameraParams& intr,
                       double sigma);
Mask render_silhouette(const Vec3& hand_pos, const Mat3& hand_rot, const HandGeometry& geom,
                       const CameraPose& pose, const CameraParams& intr, double sigma);

// 1 - softIoU + rho^2/c^2 between two masks of equal dimensions.
double diou(const Mask& render, const Mask& target);

// Fused rasterize + dIoU against a fixed binary target. The differentiable
// overload records one custom tape operation whose backward pass routes pixel
// adjoints to the projected points; the double overload computes the identical
// value (both truncate the rasterization to the hull's bounding box plus a
// 12-sigma margin, where the sigmoid tail is below 1e-5).
double silhouette_diou(const std::vector<PixelT<double>>& pts, const Mask& target,
                       const CameraParams& intr, double sigma);
ad::DVar silhouette_diou(const std::vector<PixelT<ad::DVar>>& pts, const Mask& target,
                         const CameraParams& intr, double sigma);

// --- occlusion-aware hard masks (ground truth for the synthetic pipeline) ---

struct SceneMasks {
  Mask hand, object, static_obj;
};

// Per pixel the nearest primitive along the view ray wins.
SceneMasks render_hard_masks(const SceneState& s, const HandGeometry& hand,
                             const CameraParams& cam);

// Shaded composite of the same ray cast: background 0, static 96, object 160,
// hand 255.
Mask render_composite(const SceneState& s, const HandGeometry& hand, const CameraParams& cam);

}  // namespace trajrec
