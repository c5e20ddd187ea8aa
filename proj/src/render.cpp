#include "trajrec/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace trajrec {
namespace {

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Monotone chain on the projected points; returns indices of the hull
// vertices in counter-clockwise order (in (u, v) coordinate algebra).
// Collinear and duplicate points are dropped.
std::vector<int> convex_hull(const std::vector<PixelT<double>>& p) {
  const int n = static_cast<int>(p.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (p[a].u != p[b].u) return p[a].u < p[b].u;
    return p[a].v < p[b].v;
  });
  auto cross = [&](int o, int a, int b) {
    return (p[a].u - p[o].u) * (p[b].v - p[o].v) - (p[a].v - p[o].v) * (p[b].u - p[o].u);
  };
  std::vector<int> hull;
  hull.reserve(2 * n);
  for (int i = 0; i < n; ++i) {
    const int pi = order[i];
    while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), pi) <= 0.0)
      hull.pop_back();
    hull.push_back(pi);
  }
  const std::size_t lower = hull.size() + 1;
  for (int i = n - 2; i >= 0; --i) {
    const int pi = order[i];
    while (hull.size() >= lower && cross(hull[hull.size() - 2], hull.back(), pi) <= 0.0)
      hull.pop_back();
    hull.push_back(pi);
  }
  hull.pop_back();  // last point equals the first
  // All-identical input collapses to repeated copies of one point.
  if (hull.empty()) hull.push_back(order[0]);
  if (hull.size() == 2 && hull[0] == hull[1]) hull.pop_back();
  return hull;
}

struct HullGeom {
  std::vector<int> idx;  // hull vertex -> index into the original points
  std::vector<double> vx, vy;
  std::vector<double> ex, ey, inv_len2;  // edge k: vertex k -> k+1 (mod m)
  int m = 0;

  void build(const std::vector<PixelT<double>>& pts) {
    idx = convex_hull(pts);
    m = static_cast<int>(idx.size());
    vx.resize(m);
    vy.resize(m);
    ex.resize(m);
    ey.resize(m);
    inv_len2.resize(m);
    for (int k = 0; k < m; ++k) {
      vx[k] = pts[idx[k]].u;
      vy[k] = pts[idx[k]].v;
    }
    for (int k = 0; k < m; ++k) {
      const int k1 = (k + 1) % m;
      ex[k] = vx[k1] - vx[k];
      ey[k] = vy[k1] - vy[k];
      const double l2 = ex[k] * ex[k] + ey[k] * ey[k];
      inv_len2[k] = l2 > 1e-24 ? 1.0 / l2 : 0.0;
    }
  }
};

struct Feature {
  int edge = 0;
  double t = 0.0;
};

// Signed distance from (px, py) to the hull boundary; negative inside.
// Also reports the closest edge and its clamped parameter.
double hull_signed_distance(const HullGeom& h, double px, double py, Feature* f) {
  double best = std::numeric_limits<double>::infinity();
  int be = 0;
  double bt = 0.0;
  bool inside = h.m >= 3;
  for (int k = 0; k < h.m; ++k) {
    const double rx = px - h.vx[k], ry = py - h.vy[k];
    if (h.ex[k] * ry - h.ey[k] * rx < 0.0) inside = false;
    const double t = std::clamp((rx * h.ex[k] + ry * h.ey[k]) * h.inv_len2[k], 0.0, 1.0);
    const double dx = rx - t * h.ex[k], dy = ry - t * h.ey[k];
    const double d2 = dx * dx + dy * dy;
    if (d2 < best) {
      best = d2;
      be = k;
      bt = t;
    }
  }
  if (f) {
    f->edge = be;
    f->t = bt;
  }
  return (inside ? -1.0 : 1.0) * std::sqrt(best);
}

template <class F>
Mask rasterize_full(const std::vector<PixelT<double>>& pts, const CameraParams& intr,
                    F&& row_loop) {
  if (pts.empty()) throw std::invalid_argument("rasterize: no projected points");
  HullGeom hull;
  hull.build(pts);
  Mask mask(intr.image_w, intr.image_h);
  row_loop(hull, mask);
  return mask;
}

struct MaskStats {
  double sum = 0.0, mu_u = 0.0, mu_v = 0.0;
  int minx = 0, maxx = -1, miny = 0, maxy = -1;
  bool has_support = false;
};

MaskStats mask_stats(const Mask& m) {
  MaskStats s;
  s.minx = m.width;
  s.miny = m.height;
  double su = 0.0, sv = 0.0;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      const double v = m.at(x, y);
      if (v > 0.0) {
        s.sum += v;
        su += v * (x + 0.5);
        sv += v * (y + 0.5);
      }
      if (v >= 0.5) {
        s.has_support = true;
        s.minx = std::min(s.minx, x);
        s.maxx = std::max(s.maxx, x);
        s.miny = std::min(s.miny, y);
        s.maxy = std::max(s.maxy, y);
      }
    }
  if (s.sum > 0.0) {
    s.mu_u = su / s.sum;
    s.mu_v = sv / s.sum;
  }
  return s;
}

}  // namespace

Mask rasterize_soft_serial(const std::vector<PixelT<double>>& pts, const CameraParams& intr,
                           double sigma) {
  return rasterize_full(pts, intr, [&](const HullGeom& hull, Mask& mask) {
    for (int y = 0; y < mask.height; ++y)
      for (int x = 0; x < mask.width; ++x) {
        const double d = hull_signed_distance(hull, x + 0.5, y + 0.5, nullptr);
        mask.at(x, y) = stable_sigmoid(-d / sigma);
      }
  });
}

Mask rasterize_soft_omp(const std::vector<PixelT<double>>& pts, const CameraParams& intr,
                        double sigma) {
  return rasterize_full(pts, intr, [&](const HullGeom& hull, Mask& mask) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < mask.height; ++y)
      for (int x = 0; x < mask.width; ++x) {
        const double d = hull_signed_distance(hull, x + 0.5, y + 0.5, nullptr);
        mask.at(x, y) = stable_sigmoid(-d / sigma);
      }
  });
}

namespace {

std::vector<PixelT<double>> project_or_flag(const std::vector<Vec3>& world,
                                            const CameraPose& pose, const CameraParams& intr,
                                            bool* all_behind) {
  const double se = std::sin(pose.elevation), ce = std::cos(pose.elevation);
  *all_behind = true;
  for (const Vec3& p : world)
    if (ce * p.y - se * (p.z - pose.height) > 1e-4) *all_behind = false;
  std::vector<PixelT<double>> out;
  if (*all_behind) return out;
  out.reserve(world.size());
  for (const Vec3& p : world) out.push_back(project(p, pose, intr));
  return out;
}

}  // namespace

Mask render_silhouette(const Cuboid& c, const CameraPose& pose, const CameraParams& intr,
                       double sigma) {
  bool all_behind = false;
  const auto pts = project_or_flag(cuboid_silhouette_points(c), pose, intr, &all_behind);
  if (all_behind) return Mask(intr.image_w, intr.image_h);
  return rasterize_soft_omp(pts, intr, sigma);
}

Mask render_silhouette(const Vec3& hand_pos, const Mat3& hand_rot, const HandGeometry& geom,
                       const CameraPose& pose, const CameraParams& intr, double sigma) {
  bool all_behind = false;
  const auto pts =
      project_or_flag(cylinder_silhouette_points(hand_pos, hand_rot, geom), pose, intr, &all_behind);
  if (all_behind) return Mask(intr.image_w, intr.image_h);
  return rasterize_soft_omp(pts, intr, sigma);
}

double diou(const Mask& render, const Mask& target) {
  if (render.width != target.width || render.height != target.height)
    throw std::invalid_argument("diou: mask dimensions differ");
  double inter = 0.0, uni = 0.0;
  for (std::size_t i = 0; i < render.data.size(); ++i) {
    inter += std::min(render.data[i], target.data[i]);
    uni += std::max(render.data[i], target.data[i]);
  }
  double value = 1.0 - inter / std::max(uni, 1e-6);
  const MaskStats sr = mask_stats(render), st = mask_stats(target);
  if (sr.has_support && st.has_support) {
    const double du = sr.mu_u - st.mu_u, dv = sr.mu_v - st.mu_v;
    const double bw = std::max(sr.maxx, st.maxx) - std::min(sr.minx, st.minx);
    const double bh = std::max(sr.maxy, st.maxy) - std::min(sr.miny, st.miny);
    const double c2 = std::max(bw * bw + bh * bh, 1e-6);
    value += (du * du + dv * dv) / c2;
  }
  return value;
}

namespace {

// Everything the fused rasterize+dIoU pass computes, kept for the backward
// sweep. Pixels outside the bounding box (hull extent plus a 12-sigma margin,
// where the sigmoid tail is < 1e-5) contribute exactly zero render mass.
struct FusedData {
  HullGeom hull;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // pixel bbox, half-open, clipped
  std::vector<double> a;               // soft render values, bbox row-major
  std::vector<float> b;                // target values at the same pixels
  std::vector<int32_t> fedge;
  std::vector<float> ft;
  double inter = 0.0, uni_eps = 1e-6, sum_a = 0.0;
  double mu_u = 0.0, mu_v = 0.0, g_u = 0.0, g_v = 0.0, c2 = 1.0;
  bool rho_active = false;
  bool uni_clamped = false;  // the union sum fell below the 1e-6 guard
  double sigma = 1.5;
  double value = 1.0;
};

void fused_forward(const std::vector<PixelT<double>>& pts, const Mask& target,
                   const CameraParams& intr, double sigma, bool record, FusedData& out) {
  if (pts.empty()) throw std::invalid_argument("silhouette_diou: no projected points");
  if (target.width != intr.image_w || target.height != intr.image_h)
    throw std::invalid_argument("silhouette_diou: target dimensions mismatch");
  out.sigma = sigma;
  out.hull.build(pts);

  double minu = pts[0].u, maxu = pts[0].u, minv = pts[0].v, maxv = pts[0].v;
  for (const auto& p : pts) {
    minu = std::min(minu, p.u);
    maxu = std::max(maxu, p.u);
    minv = std::min(minv, p.v);
    maxv = std::max(maxv, p.v);
  }
  const int margin = static_cast<int>(std::ceil(12.0 * sigma)) + 1;
  out.x0 = std::max(0, static_cast<int>(std::floor(minu)) - margin);
  out.y0 = std::max(0, static_cast<int>(std::floor(minv)) - margin);
  out.x1 = std::min(intr.image_w, static_cast<int>(std::ceil(maxu)) + margin);
  out.y1 = std::min(intr.image_h, static_cast<int>(std::ceil(maxv)) + margin);
  const int bw = std::max(0, out.x1 - out.x0), bh = std::max(0, out.y1 - out.y0);

  if (record) {
    out.a.assign(static_cast<std::size_t>(bw) * bh, 0.0);
    out.b.assign(static_cast<std::size_t>(bw) * bh, 0.0f);
    out.fedge.assign(static_cast<std::size_t>(bw) * bh, 0);
    out.ft.assign(static_cast<std::size_t>(bw) * bh, 0.0f);
  }

  const MaskStats st = mask_stats(target);

  // Per-row partial sums merged in row order: the result is independent of
  // the OpenMP schedule and bit-identical to a serial run.
  std::vector<double> row_i(bh, 0.0), row_u(bh, 0.0), row_sa(bh, 0.0);
  std::vector<double> row_sau(bh, 0.0), row_sav(bh, 0.0), row_sb(bh, 0.0);
  std::vector<int> row_minx(bh, intr.image_w), row_maxx(bh, -1);

#pragma omp parallel for schedule(static)
  for (int ry = 0; ry < bh; ++ry) {
    const int y = out.y0 + ry;
    const double pyc = y + 0.5;
    Feature f;
    for (int rx = 0; rx < bw; ++rx) {
      const int x = out.x0 + rx;
      const double d = hull_signed_distance(out.hull, x + 0.5, pyc, &f);
      const double a = stable_sigmoid(-d / sigma);
      const double b = target.at(x, y);
      const std::size_t i = static_cast<std::size_t>(ry) * bw + rx;
      if (record) {
        out.a[i] = a;
        out.b[i] = static_cast<float>(b);
        out.fedge[i] = f.edge;
        out.ft[i] = static_cast<float>(f.t);
      }
      row_i[ry] += std::min(a, b);
      row_u[ry] += std::max(a, b);
      row_sb[ry] += b;
      if (a > 0.0) {
        row_sa[ry] += a;
        row_sau[ry] += a * (x + 0.5);
        row_sav[ry] += a * pyc;
      }
      if (a >= 0.5) {
        row_minx[ry] = std::min(row_minx[ry], x);
        row_maxx[ry] = std::max(row_maxx[ry], x);
      }
    }
  }

  double inter = 0.0, uni = 0.0, sum_a = 0.0, sau = 0.0, sav = 0.0, sb_bbox = 0.0;
  int rminx = intr.image_w, rmaxx = -1, rminy = intr.image_h, rmaxy = -1;
  for (int ry = 0; ry < bh; ++ry) {
    inter += row_i[ry];
    uni += row_u[ry];
    sum_a += row_sa[ry];
    sau += row_sau[ry];
    sav += row_sav[ry];
    sb_bbox += row_sb[ry];
    if (row_maxx[ry] >= 0) {
      rminx = std::min(rminx, row_minx[ry]);
      rmaxx = std::max(rmaxx, row_maxx[ry]);
      rminy = std::min(rminy, out.y0 + ry);
      rmaxy = std::max(rmaxy, out.y0 + ry);
    }
  }
  uni += st.sum - sb_bbox;  // target mass outside the bbox, where a == 0

  out.inter = inter;
  out.uni_clamped = uni < 1e-6;
  out.uni_eps = std::max(uni, 1e-6);
  out.sum_a = sum_a;
  out.value = 1.0 - inter / out.uni_eps;

  out.rho_active = rmaxx >= 0 && st.has_support;
  if (out.rho_active) {
    out.mu_u = sau / sum_a;
    out.mu_v = sav / sum_a;
    out.g_u = st.mu_u;
    out.g_v = st.mu_v;
    const double cw = std::max(rmaxx, st.maxx) - std::min(rminx, st.minx);
    const double ch = std::max(rmaxy, st.maxy) - std::min(rminy, st.miny);
    out.c2 = std::max(cw * cw + ch * ch, 1e-6);
    const double du = out.mu_u - out.g_u, dv = out.mu_v - out.g_v;
    out.value += (du * du + dv * dv) / out.c2;
  }
}

class SilhouetteDiouOp final : public ad::CustomOp {
 public:
  SilhouetteDiouOp(FusedData data, std::vector<int32_t> ids_u, std::vector<int32_t> ids_v)
      : d_(std::move(data)), ids_u_(std::move(ids_u)), ids_v_(std::move(ids_v)) {}

  std::size_t backward(double out_adj, double* adj) const override {
    const int bw = d_.x1 - d_.x0, bh = d_.y1 - d_.y0;
    if (bw <= 0 || bh <= 0) return 0;
    const int m = d_.hull.m;
    std::vector<double> gv_u(m, 0.0), gv_v(m, 0.0);
    const double inv_u = 1.0 / d_.uni_eps;
    // When the guard clamps the union, the denominator is constant.
    const double i_invu2 = d_.uni_clamped ? 0.0 : d_.inter * inv_u * inv_u;
    const double rho_cu = d_.rho_active ? 2.0 * (d_.mu_u - d_.g_u) / (d_.sum_a * d_.c2) : 0.0;
    const double rho_cv = d_.rho_active ? 2.0 * (d_.mu_v - d_.g_v) / (d_.sum_a * d_.c2) : 0.0;

    std::size_t touched = 0;
    // Per-row partial vertex adjoints, merged serially in row order.
    std::vector<std::vector<double>> row_gu(bh), row_gv(bh);
#pragma omp parallel for schedule(static)
    for (int ry = 0; ry < bh; ++ry) {
      std::vector<double>& gu = row_gu[ry];
      std::vector<double>& gv = row_gv[ry];
      gu.assign(m, 0.0);
      gv.assign(m, 0.0);
      const double pyc = d_.y0 + ry + 0.5;
      for (int rx = 0; rx < bw; ++rx) {
        const std::size_t i = static_cast<std::size_t>(ry) * bw + rx;
        const double a = d_.a[i];
        const double slope = a * (1.0 - a);
        if (slope <= 0.0) continue;  // saturated pixel: no gradient
        const double b = d_.b[i];
        double dval_da = -(a <= b ? inv_u : 0.0) + (a >= b ? i_invu2 : 0.0);
        const double pxc = d_.x0 + rx + 0.5;
        if (d_.rho_active)
          dval_da += rho_cu * (pxc - d_.mu_u) + rho_cv * (pyc - d_.mu_v);
        const double d_adj = out_adj * dval_da * (-slope / d_.sigma);
        if (d_adj == 0.0) continue;

        const int e = d_.fedge[i];
        const double t = d_.ft[i];
        const int e1 = (e + 1) % m;
        const double qx = d_.hull.vx[e] + t * d_.hull.ex[e];
        const double qy = d_.hull.vy[e] + t * d_.hull.ey[e];
        double ux = pxc - qx, uy = pyc - qy;
        const double dist = std::sqrt(ux * ux + uy * uy);
        if (dist < 1e-12) continue;  // pixel exactly on the boundary
        ux /= dist;
        uy /= dist;
        const double sign = a > 0.5 ? -1.0 : 1.0;
        const double g0 = -sign * (1.0 - t) * d_adj;
        const double g1 = -sign * t * d_adj;
        gu[e] += g0 * ux;
        gv[e] += g0 * uy;
        gu[e1] += g1 * ux;
        gv[e1] += g1 * uy;
      }
    }
    for (int ry = 0; ry < bh; ++ry) {
      for (int k = 0; k < m; ++k) {
        gv_u[k] += row_gu[ry][k];
        gv_v[k] += row_gv[ry][k];
      }
      touched += static_cast<std::size_t>(bw);
    }

    for (int k = 0; k < m; ++k) {
      const int j = d_.hull.idx[k];
      if (ids_u_[j] >= 0) adj[ids_u_[j]] += gv_u[k];
      if (ids_v_[j] >= 0) adj[ids_v_[j]] += gv_v[k];
    }
    return touched;
  }

 private:
  FusedData d_;
  std::vector<int32_t> ids_u_, ids_v_;
};

}  // namespace

double silhouette_diou(const std::vector<PixelT<double>>& pts, const Mask& target,
                       const CameraParams& intr, double sigma) {
  FusedData d;
  fused_forward(pts, target, intr, sigma, /*record=*/false, d);
  return d.value;
}

ad::DVar silhouette_diou(const std::vector<PixelT<ad::DVar>>& pts, const Mask& target,
                         const CameraParams& intr, double sigma) {
  const std::size_t n = pts.size();
  std::vector<PixelT<double>> vals(n);
  std::vector<int32_t> ids_u(n), ids_v(n);
  bool any_active = false;
  for (std::size_t i = 0; i < n; ++i) {
    vals[i].u = pts[i].u.v;
    vals[i].v = pts[i].v.v;
    vals[i].depth = pts[i].depth.v;
    ids_u[i] = pts[i].u.id;
    ids_v[i] = pts[i].v.id;
    any_active = any_active || ids_u[i] >= 0 || ids_v[i] >= 0;
  }
  FusedData d;
  fused_forward(vals, target, intr, sigma, /*record=*/any_active, d);
  if (!any_active) return ad::DVar(d.value);
  ad::Tape* tape = ad::active_tape();
  if (!tape) throw std::logic_error("silhouette_diou: active inputs but no active tape");
  const double value = d.value;
  return tape->push_custom(value,
                           std::make_unique<SilhouetteDiouOp>(std::move(d), std::move(ids_u),
                                                              std::move(ids_v)));
}

// --- occlusion-aware hard masks ---

namespace {

enum class Entity : uint8_t { None, Static, Object, Hand };

template <class F>
void cast_scene(const SceneState& s, const HandGeometry& hand, const CameraParams& cam,
                F&& per_pixel) {
  const Cuboid obj = object_cuboid(s);
  const Cuboid stat = s.has_static ? static_cuboid(s) : Cuboid{};
  const Vec3 origin{0.0, 0.0, cam.height};
  const double se = std::sin(cam.elevation), ce = std::cos(cam.elevation);
  const Vec3 fwd{0.0, ce, -se};
  const Vec3 right{1.0, 0.0, 0.0};
  const Vec3 down{0.0, -se, -ce};
  const double fpix = focal_pixels(cam);
  const Vec3 axis = s.hand_rot.col(0);

#pragma omp parallel for schedule(static)
  for (int y = 0; y < cam.image_h; ++y)
    for (int x = 0; x < cam.image_w; ++x) {
      const Vec3 dir = fwd + right * ((x + 0.5 - 0.5 * cam.image_w) / fpix) +
                       down * ((y + 0.5 - 0.5 * cam.image_h) / fpix);
      double best = std::numeric_limits<double>::infinity();
      Entity who = Entity::None;
      if (const auto t = ray_cylinder(origin, dir, s.hand_pos, axis, hand.length / 2.0,
                                      hand.radius);
          t && *t < best) {
        best = *t;
        who = Entity::Hand;
      }
      if (const auto t = ray_cuboid(origin, dir, obj); t && *t < best) {
        best = *t;
        who = Entity::Object;
      }
      if (s.has_static) {
        if (const auto t = ray_cuboid(origin, dir, stat); t && *t < best) {
          best = *t;
          who = Entity::Static;
        }
      }
      per_pixel(x, y, who);
    }
}

}  // namespace

SceneMasks render_hard_masks(const SceneState& s, const HandGeometry& hand,
                             const CameraParams& cam) {
  SceneMasks out{Mask(cam.image_w, cam.image_h), Mask(cam.image_w, cam.image_h),
                 Mask(cam.image_w, cam.image_h)};
  cast_scene(s, hand, cam, [&](int x, int y, Entity who) {
    if (who == Entity::Hand) out.hand.at(x, y) = 1.0;
    else if (who == Entity::Object) out.object.at(x, y) = 1.0;
    else if (who == Entity::Static) out.static_obj.at(x, y) = 1.0;
  });
  return out;
}

Mask render_composite(const SceneState& s, const HandGeometry& hand, const CameraParams& cam) {
  Mask out(cam.image_w, cam.image_h);
  cast_scene(s, hand, cam, [&](int x, int y, Entity who) {
    if (who == Entity::Hand) out.at(x, y) = 255.0 / 255.0;
    else if (who == Entity::Object) out.at(x, y) = 160.0 / 255.0;
    else if (who == Entity::Static) out.at(x, y) = 96.0 / 255.0;
  });
  return out;
}

}  // namespace trajrec
