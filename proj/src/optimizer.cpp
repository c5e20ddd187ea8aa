#include "trajrec/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <ostream>
#include <string>

#include "trajrec/geometry.hpp"
#include "trajrec/physics.hpp"
#include "trajrec/render.hpp"

namespace trajrec {

std::vector<double> adam_step(AdamState& st, std::vector<double>& params,
                              const std::vector<double>& grad) {
  if (params.size() != st.m.size() || grad.size() != st.m.size())
    throw std::invalid_argument("adam_step: parameter/gradient length mismatch");
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad[i]))
      throw std::runtime_error("adam_step: non-finite gradient at iteration " +
                               std::to_string(st.step) + ", parameter " + std::to_string(i));
  ++st.step;
  const double bc1 = 1.0 - std::pow(st.hp.beta1, st.step);
  const double bc2 = 1.0 - std::pow(st.hp.beta2, st.step);
  std::vector<double> delta(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    st.m[i] = st.hp.beta1 * st.m[i] + (1.0 - st.hp.beta1) * grad[i];
    st.v[i] = st.hp.beta2 * st.v[i] + (1.0 - st.hp.beta2) * grad[i] * grad[i];
    delta[i] = st.hp.alpha * (st.m[i] / bc1) / (std::sqrt(st.v[i] / bc2) + st.hp.eps);
    params[i] -= delta[i];
  }
  return delta;
}

namespace {

// Runs fn(); when it throws (integration blow-up, degenerate rotation,
// non-finite loss) the previous Adam update is halved in place and fn retried,
// up to three times, after which the error propagates with iteration context.
template <class Fn>
void with_backoff(std::vector<double>& params, std::vector<double>& delta, int iteration,
                  Fn&& fn) {
  for (int attempt = 0;; ++attempt) {
    try {
      fn();
      return;
    } catch (const std::exception& e) {
      if (delta.empty() || attempt >= 3)
        throw std::runtime_error("iteration " + std::to_string(iteration) + ": " + e.what());
      for (std::size_t i = 0; i < params.size(); ++i) {
        delta[i] *= 0.5;
        params[i] += delta[i];
      }
    }
  }
}

// Phase-1 per-frame parameter block: hand pose (9), object pose (3 + yaw),
// then the scene globals fitted only on the anchor frame.
constexpr int kPoseDof = 13;
constexpr int kFrameDof = 22;

template <class S>
SceneStateT<S> decode_frame(const std::vector<S>& q, bool has_static) {
  auto vec = [&](int o) { return Vec3T<S>{q[o], q[o + 1], q[o + 2]}; };
  SceneStateT<S> s;
  s.hand_pos = vec(0);
  s.hand_rot = rot6_to_matrix(Rot6T<S>{vec(3), vec(6)});
  s.obj_pos = vec(9);
  s.obj_rot = rotation_about_z_t(q[12]);
  s.obj_size = Vec3T<S>{softplus(q[13]), softplus(q[14]), softplus(q[15])};
  s.has_static = has_static;
  s.static_size = Vec3T<S>{softplus(q[19]), softplus(q[20]), softplus(q[21])};
  s.static_pos = Vec3T<S>{q[16], q[17], s.static_size.z * 0.5};
  s.static_yaw = q[18];
  return s;
}

bool mask_centroid(const Mask& m, double& cx, double& cy) {
  double sum = 0.0, su = 0.0, sv = 0.0;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      const double v = m.at(x, y);
      if (v <= 0.0) continue;
      sum += v;
      su += v * (x + 0.5);
      sv += v * (y + 0.5);
    }
  if (sum <= 0.0) return false;
  cx = su / sum;
  cy = sv / sum;
  return true;
}

// Camera ray through the mask centroid, intersected with a horizontal plane.
// The returned point always lies on the ray, clamped to a plausible range.
Vec3 backproject_centroid(const Mask& m, const CameraPose& pose, const CameraParams& intr,
                          double plane_z, const Vec3& fallback) {
  double cx = 0.0, cy = 0.0;
  if (!mask_centroid(m, cx, cy)) return fallback;
  const double f = focal_pixels(intr);
  const double ce = std::cos(pose.elevation), se = std::sin(pose.elevation);
  const Vec3 fwd{0.0, ce, -se};
  const Vec3 right{1.0, 0.0, 0.0};
  const Vec3 down{0.0, -se, -ce};
  const Vec3 dir = fwd + right * ((cx - intr.image_w * 0.5) / f) +
                   down * ((cy - intr.image_h * 0.5) / f);
  double t = -1.0;
  if (std::abs(dir.z) > 1e-6) t = (plane_z - pose.height) / dir.z;
  if (t > 0.0)
    t = std::clamp(t, 0.2, 2.0);
  else
    t = 0.7 / std::max(dir.y, 1e-3);  // ray parallel to the plane: nominal depth
  return Vec3{0.0, 0.0, pose.height} + dir * t;
}

struct FrameFitSetup {
  const CameraParams& intr;
  CameraPose pose;
  HandGeometry hand;
  const LossWeights& weights;
  double sigma;
  AdamParams adam;
};

// Adam on one frame's pose block against the perceptual loss plus the
// tip-to-object distance term on contact frames. pose_only freezes the scene
// globals (sizes, static pose) fitted by the anchor frame. Returns the last
// evaluated loss (infinity when iters is zero).
double fit_frame(std::vector<double>& q, const MaskSequence& single, int tau_k, int iters,
                 bool pose_only, bool has_static, const FrameFitSetup& setup, ad::Tape& tape) {
  AdamState st(q.size(), setup.adam);
  std::vector<double> grad(q.size(), 0.0);
  std::vector<double> delta;
  double last = std::numeric_limits<double>::infinity();
  for (int it = 0; it < iters; ++it) {
    with_backoff(q, delta, it, [&] {
      ad::TapeScope scope(&tape);
      tape.clear();
      std::vector<ad::DVar> leaves(q.size());
      for (std::size_t i = 0; i < q.size(); ++i) leaves[i] = tape.leaf(q[i]);
      std::vector<SceneStateT<ad::DVar>> frames{decode_frame(leaves, has_static)};
      const CameraPoseT<ad::DVar> pose{ad::DVar(setup.pose.height), ad::DVar(setup.pose.elevation)};
      ad::DVar loss =
          perceptual_loss(frames, single, pose, setup.intr, setup.hand, setup.weights, setup.sigma);
      if (tau_k) {
        const ad::DVar d = hand_tip_object_distance(frames[0], setup.hand);
        const ad::DVar dpos = ad::max(d, ad::DVar(0.0));
        loss += setup.weights.contact * dpos * dpos;
      }
      if (!std::isfinite(value_of(loss))) throw std::runtime_error("per-frame fit: non-finite loss");
      last = value_of(loss);
      tape.backward(loss);
      for (std::size_t i = 0; i < q.size(); ++i) grad[i] = tape.grad(leaves[i]);
    });
    if (pose_only) std::fill(grad.begin() + kPoseDof, grad.end(), 0.0);
    delta = adam_step(st, q, grad);
  }
  return last;
}

}  // namespace

LossTerms<double> evaluate_params(const std::vector<double>& params, const ParamLayout& lay,
                                  const MaskSequence& targets, const ContactSignal& tau,
                                  const Config& config, const HandGeometry& hand,
                                  std::vector<double>* grad_out) {
  if (!grad_out) {
    const DecodedScene<double> dec = decode_params(params, lay);
    const IntegrationResult res =
        integrate(dec.initial, dec.spline, config.physics, hand, lay.duration(), lay.n_frames);
    return total_loss(res.samples, dec.spline, res.times, targets, tau, dec.pose, config.camera,
                      hand, config.weights, config.sigma);
  }

  static thread_local ad::Tape tape;  // reused across iterations to keep capacity
  ad::TapeScope scope(&tape);
  tape.clear();
  std::vector<ad::DVar> leaves(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) leaves[i] = tape.leaf(params[i]);
  const DecodedScene<ad::DVar> dec = decode_params(leaves, lay);
  const IntegrationResultT<ad::DVar> res =
      integrate(dec.initial, dec.spline, config.physics, hand, lay.duration(), lay.n_frames);
  const LossTerms<ad::DVar> terms = total_loss(res.samples, dec.spline, res.times, targets, tau,
                                               dec.pose, config.camera, hand, config.weights,
                                               config.sigma);
  tape.backward(terms.total());
  grad_out->resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) (*grad_out)[i] = tape.grad(leaves[i]);
  return {value_of(terms.perceptual), value_of(terms.regularization), value_of(terms.contact)};
}

InitResult initialize(const MaskSequence& targets, const ContactSignal& tau, const Config& config) {
  config.validate();
  targets.validate();
  const int n = targets.frames();
  if (n < 2) throw std::invalid_argument("initialize: need at least 2 frames");
  if (tau.frames() != n)
    throw std::invalid_argument("initialize: contact signal frame count differs from masks");

  bool any = false, any_static = false;
  for (int k = 0; k < n; ++k)
    any = any || mask_nonempty(targets.hand[k]) || mask_nonempty(targets.object[k]);
  for (const Mask& m : targets.static_obj) any_static = any_static || mask_nonempty(m);
  if (!any && !any_static) throw std::invalid_argument("initialize: all target masks are empty");
  const bool has_static = any_static;

  const CameraParams& intr = config.camera;

  // Single-frame guesses under a candidate camera: entity centroid rays
  // dropped onto horizontal planes at the default half-heights; the hand
  // starts aimed at the object.
  auto seed_anchor = [&](const CameraPose& cpose, int k) {
    const Vec3 obj0 =
        backproject_centroid(targets.object[k], cpose, intr, 0.03, Vec3{0.0, 0.7, 0.03});
    const Vec3 hand0 =
        backproject_centroid(targets.hand[k], cpose, intr, 0.10, Vec3{0.0, 0.55, 0.12});
    Vec3 aim = obj0 - hand0;
    if (norm(aim) < 1e-6) aim = Vec3{0.0, 1.0, 0.0};
    aim = aim / norm(aim);
    const Vec3 aim_up = std::abs(aim.z) < 0.9 ? Vec3{0.0, 0.0, 1.0} : Vec3{0.0, 1.0, 0.0};

    std::vector<double> q(kFrameDof, 0.0);
    q[0] = hand0.x; q[1] = hand0.y; q[2] = hand0.z;
    q[3] = aim.x;   q[4] = aim.y;   q[5] = aim.z;
    q[6] = aim_up.x; q[7] = aim_up.y; q[8] = aim_up.z;
    q[9] = obj0.x;  q[10] = obj0.y; q[11] = obj0.z;
    q[13] = q[14] = q[15] = softplus_inverse(0.06);
    if (has_static) {
      const Vec3 st0 =
          backproject_centroid(targets.static_obj[k], cpose, intr, 0.045, Vec3{0.15, 0.7, 0.045});
      q[16] = st0.x;
      q[17] = st0.y;
    } else {
      q[16] = 0.15;
      q[17] = 0.7;
    }
    q[19] = q[20] = q[21] = softplus_inverse(0.09);
    return q;
  };

  ad::Tape tape;

  // The configured camera height/elevation is only a guess. Short single-frame
  // fits on a coarse grid around it pick the right basin; phase 2 then refines
  // the winner continuously. Scoring uses the first grasped frame: there the
  // hand (whose physical size is known) fills the most pixels, which pins the
  // overall scale. Scored on a frame where the hand is small and distant, the
  // grid instead trades camera height against a uniformly shrunken scene.
  int score_k = n / 2;
  for (int k = 0; k < n; ++k)
    if (tau.tau[k]) { score_k = k; break; }
  MaskSequence anchor;
  anchor.hand = {targets.hand[score_k]};
  anchor.object = {targets.object[score_k]};
  if (!targets.static_obj.empty()) anchor.static_obj = {targets.static_obj[score_k]};

  // A hard tip-to-object tether during scoring keeps the hand at the object's
  // depth. The hand is the one entity of known physical size, so its pixel
  // width then discriminates camera height; with the stock tether the fit
  // just backs the hand away a few centimetres and every candidate ties.
  LossWeights grid_weights = config.weights;
  grid_weights.contact = std::max(grid_weights.contact, 1000.0);

  CameraPose pose = camera_pose(intr);
  double best_anchor = std::numeric_limits<double>::infinity();
  for (double dh : {-0.06, 0.0, 0.06}) {
    for (double de_deg : {-6.0, 0.0, 6.0}) {
      const CameraPose cand{intr.height + dh, intr.elevation + de_deg * M_PI / 180.0};
      const FrameFitSetup cand_setup{intr,          cand,         HandGeometry{},
                                     grid_weights,  config.sigma, config.adam};
      std::vector<double> qc = seed_anchor(cand, score_k);
      const double loss = fit_frame(qc, anchor, tau.tau[score_k], config.phase1_anchor_iters,
                                    /*pose_only=*/false, has_static, cand_setup, tape);
      if (std::getenv("TRAJREC_GRID_TRACE"))
        std::fprintf(stderr, "grid k=%d dh=%+.2f de=%+.0f loss=%.3f\n", score_k, dh, de_deg, loss);
      if (loss < best_anchor) {
        best_anchor = loss;
        pose = cand;
      }
    }
  }
  std::vector<double> q = seed_anchor(pose, 0);

  const FrameFitSetup setup{intr, pose, HandGeometry{}, config.weights, config.sigma, config.adam};
  std::vector<SceneState> states(n);
  for (int k = 0; k < n; ++k) {
    MaskSequence single;
    single.hand = {targets.hand[k]};
    single.object = {targets.object[k]};
    if (!targets.static_obj.empty()) single.static_obj = {targets.static_obj[k]};
    const int iters = k == 0 ? config.phase1_anchor_iters : config.phase1_frame_iters;
    fit_frame(q, single, tau.tau[k], iters, /*pose_only=*/k != 0, has_static, setup, tape);
    states[k] = decode_frame(q, has_static);
    states[k].grasp_signal = tau.tau[k] ? 0.5 : -0.5;
  }

  // Finite-difference hand rates at frame times (central where possible).
  // Angular rates start at zero: a capsule silhouette pins its axis poorly, so
  // differentiating per-frame orientation fits yields mostly noise, and a
  // grasped object inherits every bit of that wobble as spurious tilt.
  const double fps = config.fps;
  std::vector<Vec3> vel(n);
  std::vector<double> gdot(n);
  auto gval = [&](int k) { return tau.tau[k] ? 0.5 : -0.5; };
  for (int k = 0; k < n; ++k) {
    if (k == 0) {
      vel[k] = (states[1].hand_pos - states[0].hand_pos) * fps;
      gdot[k] = (gval(1) - gval(0)) * fps;
    } else if (k == n - 1) {
      vel[k] = (states[k].hand_pos - states[k - 1].hand_pos) * fps;
      gdot[k] = (gval(k) - gval(k - 1)) * fps;
    } else {
      vel[k] = (states[k + 1].hand_pos - states[k - 1].hand_pos) * (0.5 * fps);
      gdot[k] = (gval(k + 1) - gval(k - 1)) * (0.5 * fps);
    }
  }

  InitResult out;
  out.layout.n_spline = config.n_spline > 0 ? config.n_spline : std::max(4, n / 5);
  out.layout.n_frames = n;
  out.layout.fps = fps;
  out.layout.has_static = has_static;
  const ParamLayout& lay = out.layout;

  std::vector<double> p(lay.size(), 0.0);
  for (int j = 0; j < lay.n_spline; ++j) {
    const double fj = static_cast<double>(j) * (n - 1) / (lay.n_spline - 1);
    const int lo = std::min(static_cast<int>(fj), n - 2);
    const double w1 = fj - lo;
    const Vec3 v = vel[lo] * (1.0 - w1) + vel[lo + 1] * w1;
    p[7 * j + 0] = v.x; p[7 * j + 1] = v.y; p[7 * j + 2] = v.z;
    p[7 * j + 6] = gdot[lo] * (1.0 - w1) + gdot[lo + 1] * w1;
  }
  auto put_vec = [&](int o, const Vec3& v) { p[o] = v.x; p[o + 1] = v.y; p[o + 2] = v.z; };
  auto put_rot = [&](int o, const Mat3& r) {
    const Rot6 r6 = matrix_to_rot6(r);
    put_vec(o, r6.a);
    put_vec(o + 3, r6.b);
  };
  auto put_sizes = [&](int o, const Vec3& s) {
    p[o] = softplus_inverse(s.x);
    p[o + 1] = softplus_inverse(s.y);
    p[o + 2] = softplus_inverse(s.z);
  };
  const SceneState& s0 = states[0];
  // With zero initial angular rates the hand keeps one orientation all video,
  // so use the chordal mean of the per-frame fits rather than frame 0 alone.
  Mat3 rot_sum{};
  for (const SceneState& s : states) rot_sum = rot_sum + s.hand_rot;
  put_vec(lay.hand_pos(), s0.hand_pos);
  put_rot(lay.hand_rot(), rot6_to_matrix(matrix_to_rot6(rot_sum)));
  p[lay.hand_grasp()] = gval(0);
  // The object starts resting on the table, but the per-frame fit can slide
  // it below ground along the viewing ray. Packing that state as-is makes the
  // penetration impulse launch the object on the first integration, so lift
  // it back to resting height.
  Vec3 obj0 = s0.obj_pos;
  obj0.z = std::max(obj0.z, 0.5 * s0.obj_size.z);
  put_vec(lay.obj_pos(), obj0);
  p[lay.obj_yaw()] = std::atan2(s0.obj_rot(1, 0), s0.obj_rot(0, 0));
  put_sizes(lay.obj_size(), s0.obj_size);
  p[lay.static_xy()] = s0.static_pos.x;
  p[lay.static_xy() + 1] = s0.static_pos.y;
  p[lay.static_yaw()] = s0.static_yaw;
  put_sizes(lay.static_size(), s0.static_size);
  p[lay.cam_height()] = pose.height;
  p[lay.cam_elev()] = pose.elevation;

  out.params = std::move(p);
  out.frame_states = std::move(states);
  return out;
}

OptimizeResult optimize(const MaskSequence& targets, const ContactSignal& tau,
                        const Config& config, std::ostream* log) {
  InitResult init = initialize(targets, tau, config);
  const ParamLayout lay = init.layout;
  const HandGeometry hand;

  std::vector<double> params = std::move(init.params);
  std::vector<LossHistoryEntry> history;
  double best_total = std::numeric_limits<double>::infinity();
  std::vector<double> best_params = params;
  int best_iter = 0;

  auto record = [&](int it, const LossTerms<double>& terms) {
    history.push_back({it, terms});
    if (log) *log << format_loss_line(it, terms) << "\n";
    if (terms.total() < best_total) {
      best_total = terms.total();
      best_params = params;
      best_iter = it;
    }
  };

  // Stop early once the best loss has stalled; keeps converged runs cheap
  // without affecting determinism.
  constexpr int kPatience = 100;

  AdamState st(params.size(), config.adam);
  std::vector<double> grad, delta;
  int it = 0;
  for (; it < config.max_iters; ++it) {
    LossTerms<double> terms;
    with_backoff(params, delta, it, [&] {
      terms = evaluate_params(params, lay, targets, tau, config, hand, &grad);
      if (!std::isfinite(terms.total())) throw std::runtime_error("non-finite loss");
    });
    record(it, terms);
    if (it - best_iter >= kPatience) break;
    // The camera stays where the grid put it. Silhouettes alone admit a flat
    // valley (lower camera, uniformly shrunken scene) and descending it warps
    // the scene geometry; with the camera pinned, ground-contact rows fix
    // every entity's depth instead.
    grad[lay.cam_height()] = 0.0;
    grad[lay.cam_elev()] = 0.0;
    delta = adam_step(st, params, grad);
  }
  if (it == config.max_iters) {
    // The loop left one applied update unevaluated (or max_iters is zero and
    // this is the initialization itself).
    try {
      const LossTerms<double> terms = evaluate_params(params, lay, targets, tau, config, hand);
      if (std::isfinite(terms.total())) record(it, terms);
    } catch (const std::exception&) {
      // Final step diverged; the best iterate stands.
    }
  }

  const DecodedScene<double> dec = decode_params(best_params, lay);
  IntegrationResult res =
      integrate(dec.initial, dec.spline, config.physics, hand, lay.duration(), lay.n_frames);

  OptimizeResult out;
  out.trajectory.times = std::move(res.times);
  out.trajectory.samples = std::move(res.samples);
  out.trajectory.events = std::move(res.events);
  out.trajectory.hand = hand;
  out.camera = config.camera;
  out.camera.height = dec.pose.height;
  out.camera.elevation = dec.pose.elevation;
  out.history = std::move(history);
  return out;
}

}  // namespace trajrec
