#include "trajrec/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "trajrec/physics.hpp"
#include "trajrec/render.hpp"

namespace trajrec {

void DemoSpec::validate() const {
  if (n_frames < 10) throw std::invalid_argument("demo spec: need at least 10 frames");
  if (fps <= 0.0) throw std::invalid_argument("demo spec: fps must be > 0");
  if (!(obj_edge_min > 0.0 && obj_edge_min <= obj_edge_max))
    throw std::invalid_argument("demo spec: bad object edge range");
  if (!(static_edge_min > 0.0 && static_edge_min <= static_edge_max))
    throw std::invalid_argument("demo spec: bad static edge range");
  if (!(cam_height_min > 0.0 && cam_height_min <= cam_height_max))
    throw std::invalid_argument("demo spec: bad camera height range");
  if (!(cam_elev_min_deg > 0.0 && cam_elev_min_deg <= cam_elev_max_deg && cam_elev_max_deg < 90.0))
    throw std::invalid_argument("demo spec: bad camera elevation range");
}

namespace {

constexpr double kDeg = M_PI / 180.0;

// mt19937 output is pinned by the standard; building doubles from raw draws
// keeps the stream identical across standard libraries.
struct Rng {
  std::mt19937 gen;
  explicit Rng(unsigned seed) : gen(seed) {}
  double unif() {
    const std::uint64_t a = gen() >> 5, b = gen() >> 6;
    return (a * 67108864.0 + b) * (1.0 / 9007199254740992.0);
  }
  double unif(double lo, double hi) { return lo + (hi - lo) * unif(); }
  double sign() { return unif() < 0.5 ? -1.0 : 1.0; }
};

// Quintic smoothstep: zero velocity and acceleration at both ends, so motion
// segments join with the hand momentarily at rest.
double ease(double u) {
  return u <= 0.0 ? 0.0 : u >= 1.0 ? 1.0 : u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}
double ease_rate(double u) {
  return u <= 0.0 || u >= 1.0 ? 0.0 : 30.0 * u * u * (1.0 - u) * (1.0 - u);
}

// Piecewise-eased tip path: non-overlapping segments in time order, holding
// the previous endpoint between and after them.
struct TipTrack {
  struct Seg {
    double t0, t1;
    Vec3 a, b;
  };
  std::vector<Seg> segs;

  void add(double t0, double t1, const Vec3& from, const Vec3& to) {
    segs.push_back({t0, t1, from, to});
  }
  Vec3 pos(double t) const {
    Vec3 p = segs.front().a;
    for (const Seg& s : segs) {
      if (t < s.t0) break;
      p = s.a + (s.b - s.a) * ease((t - s.t0) / (s.t1 - s.t0));
    }
    return p;
  }
  Vec3 vel(double t) const {
    for (const Seg& s : segs)
      if (t >= s.t0 && t < s.t1) {
        const double u = (t - s.t0) / (s.t1 - s.t0);
        return (s.b - s.a) * (ease_rate(u) / (s.t1 - s.t0));
      }
    return Vec3{};
  }
};

// Grasp signal built from eased ramps between levels, starting at -0.5.
struct GraspTrack {
  struct Ramp {
    double t0, t1, from, to;
  };
  std::vector<Ramp> ramps;

  void add(double t0, double t1, double from, double to) { ramps.push_back({t0, t1, from, to}); }
  double rate(double t) const {
    for (const Ramp& r : ramps)
      if (t >= r.t0 && t < r.t1) {
        const double u = (t - r.t0) / (r.t1 - r.t0);
        return (r.to - r.from) * ease_rate(u) / (r.t1 - r.t0);
      }
    return 0.0;
  }
};

struct Script {
  TipTrack tip;
  GraspTrack grasp;
  Mat3 hand_rot;  // constant over the demo; the spline drives velocities only
  Vec3 obj_start;
  double obj_yaw = 0.0;
  Vec3 obj_size;
  bool has_static = false;
  Vec3 static_pos;
  double static_yaw = 0.0;
  Vec3 static_size;
  int expected_events = 2;
  // Checkpoint positions with world-space radii; all must project inside the
  // image with margin, otherwise the layout is resampled.
  std::vector<std::pair<Vec3, double>> check_pts;
};

// Shared phase schedule as fractions of the demo duration. The dip finishes
// before the grasp ramp starts, so the grasp event fires with the tip already
// inside the object; release happens while the hand holds still.
struct Phases {
  double app0, app1, dip0, dip1, gup0, gup1, man0, man1, gdn0, gdn1, ret0, ret1;
};
Phases phases(double T) {
  return {0.04 * T, 0.24 * T, 0.26 * T, 0.32 * T, 0.34 * T, 0.40 * T,
          0.42 * T, 0.66 * T, 0.70 * T, 0.74 * T, 0.78 * T, 0.92 * T};
}

Mat3 axis_frame(const Vec3& axis) {
  // Local +x along the axis, +z as close to world up as possible.
  return rot6_to_matrix(Rot6{axis, Vec3{0.0, 0.0, 1.0}});
}

double half_reach(double yaw, double ex, double ey) {
  // Horizontal half-extent of a yawed box along a world axis.
  return 0.5 * (std::abs(std::cos(yaw)) * ex + std::abs(std::sin(yaw)) * ey);
}

bool is_pull_push(ActionClass a) {
  switch (a) {
    case ActionClass::PullLeftToRight:
    case ActionClass::PullRightToLeft:
    case ActionClass::PushLeftToRight:
    case ActionClass::PushRightToLeft:
      return true;
    default:
      return false;
  }
}

Script build_script(const DemoSpec& spec, Rng& rng) {
  Script sc;
  const double T = (spec.n_frames - 1) / spec.fps;
  const Phases ph = phases(T);
  const ActionClass a = spec.action;

  sc.obj_size = {rng.unif(spec.obj_edge_min, spec.obj_edge_max),
                 rng.unif(spec.obj_edge_min, spec.obj_edge_max),
                 rng.unif(spec.obj_edge_min, spec.obj_edge_max)};
  sc.obj_yaw = rng.unif(0.0, 2.0 * M_PI);
  const Vec3& os = sc.obj_size;
  const double obj_r = 0.5 * norm(os);

  auto checkpoint = [&](const Vec3& p, double r) { sc.check_pts.emplace_back(p, r); };

  if (is_pull_push(a)) {
    const bool pull = a == ActionClass::PullLeftToRight || a == ActionClass::PullRightToLeft;
    const double dir =
        (a == ActionClass::PullLeftToRight || a == ActionClass::PushLeftToRight) ? 1.0 : -1.0;
    const double oy = rng.unif(0.62, 0.76);
    const double ox = -dir * rng.unif(0.04, 0.14);
    const double disp = rng.unif(0.09, 0.13);
    sc.obj_start = {ox, oy, 0.5 * os.z};

    // Tip ahead of the center when pulling, behind it when pushing; the hand
    // body extends further to that same side, clear of the object mask.
    const double side = pull ? dir : -dir;
    const Vec3 grasp{ox + side * 0.25 * os.x, oy, 0.5 * os.z};
    const Vec3 end = grasp + Vec3{dir * disp, 0.0, 0.0};
    const Vec3 hover = grasp + Vec3{0.0, 0.0, 0.5 * os.z + 0.05};
    const Vec3 start =
        grasp + Vec3{side * (0.13 + rng.unif(0.0, 0.04)), rng.unif(-0.02, 0.05),
                     0.09 + rng.unif(0.0, 0.05)};
    const Vec3 retreat = end + Vec3{side * 0.10, 0.02, 0.10};

    sc.hand_rot = axis_frame({-side, rng.unif(0.1, 0.3), -(0.25 + rng.unif(0.0, 0.15))});
    sc.tip.add(ph.app0, ph.app1, start, hover);
    sc.tip.add(ph.dip0, ph.dip1, hover, grasp);
    sc.tip.add(ph.man0, ph.man1, grasp, end);
    sc.tip.add(ph.ret0, ph.ret1, end, retreat);
    sc.grasp.add(ph.gup0, ph.gup1, -0.5, 0.5);
    sc.grasp.add(ph.gdn0, ph.gdn1, 0.5, -0.5);
    sc.expected_events = 2;

    checkpoint(sc.obj_start, obj_r);
    checkpoint({end.x - side * 0.25 * os.x, oy, 0.5 * os.z}, obj_r);
    checkpoint(start, 0.02);
    checkpoint(retreat, 0.02);
  } else if (a == ActionClass::PickUp) {
    const double oy = rng.unif(0.62, 0.76);
    const double ox = rng.unif(-0.08, 0.08);
    sc.obj_start = {ox, oy, 0.5 * os.z};

    const Vec3 grasp = sc.obj_start;
    const Vec3 hover = grasp + Vec3{0.0, 0.0, 0.5 * os.z + 0.05};
    const double lift = rng.unif(0.05, 0.09);
    const Vec3 end = grasp + Vec3{rng.unif(-0.02, 0.02), rng.unif(-0.02, 0.02), lift};
    // Approach from beyond the object: its mask then bites into the hand's
    // instead of the much larger hand draping over it.
    const double sidex = rng.sign();
    const Vec3 start = grasp + Vec3{sidex * rng.unif(0.02, 0.08), 0.16 + rng.unif(0.0, 0.05),
                                    0.10 + rng.unif(0.0, 0.04)};

    sc.hand_rot =
        axis_frame({-sidex * rng.unif(0.1, 0.35), -1.0, -(0.30 + rng.unif(0.0, 0.15))});
    sc.tip.add(ph.app0, ph.app1, start, hover);
    sc.tip.add(ph.dip0, ph.dip1, hover, grasp);
    sc.tip.add(ph.man0, ph.man1, grasp, end);
    sc.grasp.add(ph.gup0, ph.gup1, -0.5, 0.5);  // held through the last frame
    sc.expected_events = 1;

    checkpoint(sc.obj_start, obj_r);
    checkpoint(end, obj_r);
    checkpoint(start, 0.02);
  } else {
    // Put actions: sample the static first, sized so the relevant metric has
    // slack (taller than the object for side placements, wider for put-onto).
    Vec3 ss{rng.unif(spec.static_edge_min, spec.static_edge_max),
            rng.unif(spec.static_edge_min, spec.static_edge_max),
            rng.unif(spec.static_edge_min, spec.static_edge_max)};
    if (a == ActionClass::PutOnto) {
      ss.x = rng.unif(std::max(spec.static_edge_min, os.x + 0.025), spec.static_edge_max);
      ss.y = rng.unif(std::max(spec.static_edge_min, os.y + 0.025), spec.static_edge_max);
    } else {
      ss.z = rng.unif(std::max(spec.static_edge_min, os.z + 0.02), spec.static_edge_max);
    }

    double sy;
    if (a == ActionClass::PutBehind)
      sy = rng.unif(0.62, 0.70);
    else if (a == ActionClass::PutInFrontOf)
      sy = rng.unif(0.72, 0.80);
    else
      sy = rng.unif(0.66, 0.76);
    const double sx = rng.unif(-0.06, 0.06);
    sc.has_static = true;
    sc.static_yaw = rng.unif(0.0, 2.0 * M_PI);
    sc.static_pos = {sx, sy, 0.5 * ss.z};
    sc.static_size = ss;

    const double rx = half_reach(sc.static_yaw, ss.x, ss.y);          // static, along x
    const double ry = half_reach(sc.static_yaw + M_PI / 2, ss.x, ss.y);  // along y
    const double orx = half_reach(sc.obj_yaw, os.x, os.y);
    const double ory = half_reach(sc.obj_yaw + M_PI / 2, os.x, os.y);

    // Object starts beside the static, on a seeded side, nearer the camera.
    const double side = rng.sign();
    const double ox = sx + side * (rx + orx + 0.02 + rng.unif(0.02, 0.05));
    const double oy0 = rng.unif(0.60, 0.70);
    sc.obj_start = {ox, oy0, 0.5 * os.z};

    Vec3 place;
    if (a == ActionClass::PutBehind) {
      // Half a static-width off center: behind, but peeking out on one side.
      place = {sx + side * 0.5 * rx, sy + ry + ory + 0.01 + rng.unif(0.0, 0.02), 0.5 * os.z + 0.002};
    } else if (a == ActionClass::PutInFrontOf) {
      place = {sx + side * 0.3 * rx, sy - (ry + ory + 0.01 + rng.unif(0.0, 0.02)),
               0.5 * os.z + 0.002};
    } else if (a == ActionClass::PutNextTo) {
      place = {sx - side * (rx + orx + 0.01 + rng.unif(0.0, 0.02)), sy + rng.unif(-0.008, 0.008),
               0.5 * os.z + 0.002};
    } else {  // PutOnto
      place = {sx, sy, ss.z + 0.5 * os.z + 0.002};
    }

    const Vec3 grasp = sc.obj_start;
    const Vec3 hover = grasp + Vec3{0.0, 0.0, 0.5 * os.z + 0.05};
    const double carry_z = ss.z + 0.5 * os.z + 0.05;
    // Far-side approach, as for pick-up; the body then slants up and away,
    // above the static's image rows rather than across them.
    const Vec3 start = grasp + Vec3{side * rng.unif(0.02, 0.08), 0.16 + rng.unif(0.0, 0.05),
                                    0.10 + rng.unif(0.0, 0.04)};
    const Vec3 up{grasp.x, grasp.y, carry_z};
    const Vec3 over{place.x, place.y, carry_z};
    // Retreating further back would clip through the static after an
    // in-front placement, so back out towards the camera there.
    const double retreat_y = a == ActionClass::PutInFrontOf ? -1.0 : 1.0;
    const Vec3 retreat = place + Vec3{side * 0.06, retreat_y * (0.10 + rng.unif(0.0, 0.04)), 0.10};

    sc.hand_rot = axis_frame({-side * rng.unif(0.15, 0.4), -1.0, -(0.30 + rng.unif(0.0, 0.15))});
    sc.tip.add(ph.app0, ph.app1, start, hover);
    sc.tip.add(ph.dip0, ph.dip1, hover, grasp);
    const double man = ph.man1 - ph.man0;
    sc.tip.add(ph.man0, ph.man0 + 0.25 * man, grasp, up);
    sc.tip.add(ph.man0 + 0.30 * man, ph.man0 + 0.75 * man, up, over);
    sc.tip.add(ph.man0 + 0.80 * man, ph.man1, over, place);
    sc.tip.add(ph.ret0, ph.ret1, place, retreat);
    sc.grasp.add(ph.gup0, ph.gup1, -0.5, 0.5);
    sc.grasp.add(ph.gdn0, ph.gdn1, 0.5, -0.5);
    sc.expected_events = 2;

    checkpoint(sc.obj_start, obj_r);
    checkpoint(place, obj_r);
    checkpoint(sc.static_pos, 0.5 * norm(ss));
    checkpoint(over, obj_r);
    checkpoint(start, 0.02);
    checkpoint(retreat, 0.02);
  }
  return sc;
}

bool layout_visible(const Script& sc, const CameraParams& cam) {
  const double f = focal_pixels(cam);
  for (const auto& [p, r] : sc.check_pts) {
    PixelT<double> px;
    try {
      px = project(p, cam);
    } catch (const std::domain_error&) {
      return false;
    }
    const double m = f * r / px.depth + 6.0;
    if (px.u < m || px.u > cam.image_w - m || px.v < m || px.v > cam.image_h - m) return false;
  }
  return true;
}

ControlSpline make_spline(const Script& sc, int n, double fps) {
  // One control per frame; with a fixed hand orientation the center velocity
  // equals the scripted tip velocity.
  ControlSpline sp;
  sp.duration = (n - 1) / fps;
  sp.points.resize(n);
  for (int k = 0; k < n; ++k) {
    const double t = k / fps;
    const Vec3 v = sc.tip.vel(t);
    sp.points[k] = {v.x, v.y, v.z, 0.0, 0.0, 0.0, sc.grasp.rate(t)};
  }
  return sp;
}

SceneState initial_state(const Script& sc, const HandGeometry& hand) {
  SceneState s;
  s.hand_rot = sc.hand_rot;
  s.hand_pos = sc.tip.pos(0.0) - sc.hand_rot * Vec3{0.5 * hand.length, 0.0, 0.0};
  s.grasp_signal = -0.5;
  s.obj_pos = sc.obj_start;
  s.obj_rot = rotation_about_z(sc.obj_yaw);
  s.obj_size = sc.obj_size;
  s.has_static = sc.has_static;
  if (sc.has_static) {
    s.static_pos = sc.static_pos;
    s.static_yaw = sc.static_yaw;
    s.static_size = sc.static_size;
  }
  return s;
}

ContactSignal tau_from_events(const IntegrationResult& res, int expected, const DemoSpec& spec) {
  int n_grasp = 0, n_release = 0;
  double t_grasp = 0.0, t_release = std::numeric_limits<double>::infinity();
  for (const EventRecord& e : res.events) {
    if (e.kind == EventRecord::Kind::Grasp) {
      if (n_grasp++ == 0) t_grasp = e.time;
    } else {
      if (n_release++ == 0) t_release = e.time;
    }
  }
  if (n_grasp != 1 || n_release != expected - 1)
    throw std::runtime_error("generate: action " + std::string(to_string(spec.action)) + " seed " +
                             std::to_string(spec.seed) + " produced " +
                             std::to_string(res.events.size()) + " events, expected " +
                             std::to_string(expected));
  ContactSignal c;
  c.tau.reserve(res.times.size());
  for (double t : res.times) c.tau.push_back(t >= t_grasp && t < t_release ? 1 : 0);
  return c;
}

bool mask_centroid(const Mask& m, double* u, double* v) {
  double su = 0.0, sv = 0.0, sw = 0.0;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      const double w = m.at(x, y);
      su += w * (x + 0.5);
      sv += w * (y + 0.5);
      sw += w;
    }
  if (sw < 0.5) return false;
  *u = su / sw;
  *v = sv / sw;
  return true;
}

int median5(const std::vector<int>& v, int k) {
  const int n = static_cast<int>(v.size());
  const int lo = std::max(0, k - 2), hi = std::min(n - 1, k + 2);
  int ones = 0;
  for (int i = lo; i <= hi; ++i) ones += v[i];
  return 2 * ones > hi - lo + 1 ? 1 : 0;
}

std::string demo_path(const std::string& dir, const char* entity, int frame) {
  char name[48];
  std::snprintf(name, sizeof name, "%s_%04d.pgm", entity, frame);
  return (std::filesystem::path(dir) / "masks" / name).string();
}

}  // namespace

Demo generate(const DemoSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const HandGeometry hand;
  const PhysicsParams physics;
  const int n = spec.n_frames;
  const double T = (n - 1) / spec.fps;

  Script sc;
  CameraParams cam;
  bool visible = false;
  for (int attempt = 0; attempt < 200 && !visible; ++attempt) {
    cam = CameraParams{};
    cam.height = rng.unif(spec.cam_height_min, spec.cam_height_max);
    cam.elevation = rng.unif(spec.cam_elev_min_deg, spec.cam_elev_max_deg) * kDeg;
    sc = build_script(spec, rng);
    visible = layout_visible(sc, cam);
  }
  if (!visible)
    throw std::runtime_error("generate: no fully visible layout after 200 attempts (seed " +
                             std::to_string(spec.seed) + ")");

  const ControlSpline spline = make_spline(sc, n, spec.fps);
  const SceneState init = initial_state(sc, hand);
  const IntegrationResult res = integrate(init, spline, physics, hand, T, n);

  Demo demo;
  demo.spec = spec;
  demo.camera = cam;
  demo.ground_truth.times = res.times;
  demo.ground_truth.samples = res.samples;
  demo.ground_truth.events = res.events;
  demo.ground_truth.hand = hand;
  demo.contact = tau_from_events(res, sc.expected_events, spec);

  for (int k = 0; k < n; ++k) {
    SceneMasks m = render_hard_masks(res.samples[k], hand, cam);
    demo.masks.hand.push_back(std::move(m.hand));
    demo.masks.object.push_back(std::move(m.object));
    if (sc.has_static) demo.masks.static_obj.push_back(std::move(m.static_obj));
  }

  // A scripted demo that fails its own action metric is a generator bug.
  const Verdict verdict = evaluate(demo.ground_truth, spec.action);
  if (!verdict.success) {
    std::string what = "generate: action " + std::string(to_string(spec.action)) + " seed " +
                       std::to_string(spec.seed) + " fails its metric check:";
    for (const std::string& c : verdict.failed_criteria) what += " [" + c + "]";
    throw std::runtime_error(what);
  }
  if (!mask_nonempty(demo.masks.object.front()) || !mask_nonempty(demo.masks.hand.front()) ||
      (sc.has_static && !mask_nonempty(demo.masks.static_obj.front())))
    throw std::runtime_error("generate: empty entity mask in the first frame (seed " +
                             std::to_string(spec.seed) + ")");
  return demo;
}

ContactSignal corrupt_contact(const ContactSignal& tau, unsigned seed, double flip_rate) {
  if (!(flip_rate >= 0.0 && flip_rate <= 0.3))
    throw std::invalid_argument("corrupt_contact: flip_rate must be in [0, 0.3]");
  Rng rng(seed);
  ContactSignal out = tau;
  for (int& bit : out.tau)
    if (rng.unif() < flip_rate) bit ^= 1;
  return out;
}

ContactSignal filter_contact(const ContactSignal& noisy, const MaskSequence& masks) {
  masks.validate();
  const int n = noisy.frames();
  if (masks.frames() != n)
    throw std::invalid_argument("filter_contact: contact and mask frame counts differ");
  if (n == 0) return noisy;

  std::vector<int> med(n);
  for (int k = 0; k < n; ++k) med[k] = median5(noisy.tau, k);

  // Per-frame centroid travel of the object mask, in pixels; zero when either
  // frame's mask is empty.
  std::vector<double> motion(n, 0.0);
  double pu = 0.0, pv = 0.0;
  bool prev_ok = mask_centroid(masks.object.empty() ? Mask{} : masks.object[0], &pu, &pv);
  for (int k = 1; k < n; ++k) {
    double u = 0.0, v = 0.0;
    const bool ok = mask_centroid(masks.object[k], &u, &v);
    if (ok && prev_ok) motion[k] = std::hypot(u - pu, v - pv);
    if (ok) {
      pu = u;
      pv = v;
    }
    prev_ok = ok;
  }

  // An object already moving at the video edge implies contact there; trust
  // the first negative detection only after the motion stops.
  std::vector<int> out = med;
  if (n >= 2 && motion[1] > 2.0) {
    int p = 1;
    while (p + 1 < n && motion[p + 1] > 2.0) ++p;
    int j = p + 1;
    while (j < n && med[j] == 1) ++j;
    for (int k = 0; k < j; ++k) out[k] = 1;
  }
  if (n >= 2 && motion[n - 1] > 2.0) {
    int p = n - 1;
    while (p - 1 >= 1 && motion[p - 1] > 2.0) --p;
    int j = p - 2;
    while (j >= 0 && med[j] == 1) --j;
    for (int k = j + 1; k < n; ++k) out[k] = 1;
  }

  // Final cleanup over the trailing 15 frames.
  std::vector<int> tail = out;
  for (int k = std::max(0, n - 15); k < n; ++k) tail[k] = median5(out, k);

  ContactSignal result;
  result.tau = std::move(tail);
  return result;
}

void save_demo(const Demo& demo, const std::string& dir) {
  namespace fs = std::filesystem;
  demo.masks.validate();
  const int n = demo.masks.frames();
  if (demo.contact.frames() != n)
    throw std::invalid_argument("save_demo: contact and mask frame counts differ");

  fs::create_directories(fs::path(dir) / "masks");
  for (int k = 0; k < n; ++k) {
    write_pgm(demo.masks.hand[k], demo_path(dir, "hand", k));
    write_pgm(demo.masks.object[k], demo_path(dir, "object", k));
    if (!demo.masks.static_obj.empty())
      write_pgm(demo.masks.static_obj[k], demo_path(dir, "static", k));
  }
  write_contact(demo.contact, (fs::path(dir) / "contact.txt").string());

  char fps[32];
  std::snprintf(fps, sizeof fps, "%.10g", demo.spec.fps);
  char fov[32];
  std::snprintf(fov, sizeof fov, "%.10g", demo.camera.fov / kDeg);
  std::ostringstream ss;
  ss << "action " << to_string(demo.spec.action) << "\n"
     << "seed " << demo.spec.seed << "\n"
     << "frames " << demo.spec.n_frames << "\n"
     << "fps " << fps << "\n"
     << "image_w " << demo.camera.image_w << "\n"
     << "image_h " << demo.camera.image_h << "\n"
     << "fov_deg " << fov << "\n";
  write_text_file((fs::path(dir) / "spec.txt").string(), ss.str());

  save_trajectory(TrajectoryExport{demo.ground_truth, demo.camera, {}},
                  (fs::path(dir) / "ground_truth.txt").string());
}

LoadedDemo load_demo(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "spec.txt");
  if (!in) throw std::runtime_error("load_demo: cannot read " + dir + "/spec.txt");
  std::map<std::string, std::string> kv;
  std::string key, value;
  while (in >> key >> value) kv[key] = value;

  auto need = [&](const char* k) {
    auto it = kv.find(k);
    if (it == kv.end())
      throw std::runtime_error("load_demo: spec.txt missing key '" + std::string(k) + "'");
    return it->second;
  };

  LoadedDemo d;
  try {
    d.spec.action = parse_action(need("action"));
    d.spec.seed = static_cast<unsigned>(std::stoul(need("seed")));
    d.spec.n_frames = std::stoi(need("frames"));
    d.spec.fps = std::stod(need("fps"));
    d.camera.image_w = std::stoi(need("image_w"));
    d.camera.image_h = std::stoi(need("image_h"));
    d.camera.fov = std::stod(need("fov_deg")) * kDeg;
  } catch (const std::logic_error& e) {
    throw std::runtime_error("load_demo: bad spec.txt value: " + std::string(e.what()));
  }
  d.spec.validate();
  d.camera.validate();

  d.contact = read_contact((fs::path(dir) / "contact.txt").string());
  if (d.contact.frames() != d.spec.n_frames)
    throw std::runtime_error("load_demo: contact.txt frame count differs from spec.txt");

  const bool with_static = fs::exists(demo_path(dir, "static", 0));
  for (int k = 0; k < d.spec.n_frames; ++k) {
    d.masks.hand.push_back(read_pgm(demo_path(dir, "hand", k)));
    d.masks.object.push_back(read_pgm(demo_path(dir, "object", k)));
    if (with_static) d.masks.static_obj.push_back(read_pgm(demo_path(dir, "static", k)));
  }
  d.masks.validate();
  return d;
}

TrajectoryExport load_demo_ground_truth(const std::string& dir) {
  return load_trajectory((std::filesystem::path(dir) / "ground_truth.txt").string());
}

}  // namespace trajrec
