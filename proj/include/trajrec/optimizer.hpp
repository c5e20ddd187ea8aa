#pragma once

// Two-phase trajectory recovery. Phase 1 fits independent per-frame hand and
// object poses against the perceptual loss (no physics) and packs them into a
// flat parameter vector; phase 2 refines that vector with Adam on the total
// loss, where scene states come from the differentiable simulator.

#include <cmath>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "trajrec/io.hpp"
#include "trajrec/losses.hpp"
#include "trajrec/rotation.hpp"
#include "trajrec/spline.hpp"
#include "trajrec/types.hpp"

namespace trajrec {

// Flat decision vector: N_spline hand-rate controls of 7 (linear velocity,
// angular velocity, grasp rate), then hand initial state (position 3,
// rotation as two 3-vectors, grasp signal 1), manipulated-object initial
// (position 3, yaw 1, size 3), static object (xy 2, yaw 1, size 3) and
// camera (height, elevation). The initial object rotation is a yaw because
// the object starts resting flat on the table; a free 3D rotation lets the
// fit tilt it slightly, after which it settles onto one corner and sinks
// well past the penetration the metrics allow. Later rotations are still
// unconstrained through the angular-velocity dynamics. Sizes are stored
// pre-softplus so every decoded size is strictly positive while Adam stays
// unconstrained.
struct ParamLayout {
  int n_spline = 0;
  int n_frames = 0;
  double fps = 12.0;
  bool has_static = false;

  int size() const { return 7 * n_spline + 25; }
  double duration() const { return (n_frames - 1) / fps; }

  int hand_pos() const { return 7 * n_spline; }
  int hand_rot() const { return 7 * n_spline + 3; }
  int hand_grasp() const { return 7 * n_spline + 9; }
  int obj_pos() const { return 7 * n_spline + 10; }
  int obj_yaw() const { return 7 * n_spline + 13; }
  int obj_size() const { return 7 * n_spline + 14; }
  int static_xy() const { return 7 * n_spline + 17; }
  int static_yaw() const { return 7 * n_spline + 19; }
  int static_size() const { return 7 * n_spline + 20; }
  int cam_height() const { return 7 * n_spline + 23; }
  int cam_elev() const { return 7 * n_spline + 24; }
};

template <class S>
struct DecodedScene {
  SceneStateT<S> initial;
  ControlSplineT<S> spline;
  CameraPoseT<S> pose;
};

template <class S>
DecodedScene<S> decode_params(const std::vector<S>& p, const ParamLayout& lay) {
  if (static_cast<int>(p.size()) != lay.size())
    throw std::invalid_argument("decode_params: parameter vector length mismatch");
  DecodedScene<S> out;
  out.spline.duration = lay.duration();
  out.spline.points.resize(lay.n_spline);
  for (int j = 0; j < lay.n_spline; ++j)
    for (int c = 0; c < 7; ++c) out.spline.points[j][c] = p[7 * j + c];

  auto vec = [&](int o) { return Vec3T<S>{p[o], p[o + 1], p[o + 2]}; };
  auto rot = [&](int o) { return rot6_to_matrix(Rot6T<S>{vec(o), vec(o + 3)}); };
  auto sizes = [&](int o) {
    return Vec3T<S>{softplus(p[o]), softplus(p[o + 1]), softplus(p[o + 2])};
  };

  SceneStateT<S>& s = out.initial;
  s.hand_pos = vec(lay.hand_pos());
  s.hand_rot = rot(lay.hand_rot());
  s.grasp_signal = p[lay.hand_grasp()];
  s.obj_pos = vec(lay.obj_pos());
  s.obj_rot = rotation_about_z_t(p[lay.obj_yaw()]);
  s.obj_size = sizes(lay.obj_size());
  s.has_static = lay.has_static;
  s.static_size = sizes(lay.static_size());
  s.static_pos = Vec3T<S>{p[lay.static_xy()], p[lay.static_xy() + 1], s.static_size.z * 0.5};
  s.static_yaw = p[lay.static_yaw()];

  out.pose.height = p[lay.cam_height()];
  out.pose.elevation = p[lay.cam_elev()];
  return out;
}

struct AdamState {
  int step = 0;
  std::vector<double> m, v;
  AdamParams hp;

  AdamState(std::size_t n, const AdamParams& hyper) : m(n, 0.0), v(n, 0.0), hp(hyper) {}
};

// One bias-corrected Adam update in place. Returns the applied step so a
// caller can back off by halves after an integration blow-up.
std::vector<double> adam_step(AdamState& st, std::vector<double>& params,
                              const std::vector<double>& grad);

// Total loss (and optionally its gradient) for a packed parameter vector:
// decode, integrate over the frame grid, evaluate all loss terms.
LossTerms<double> evaluate_params(const std::vector<double>& params, const ParamLayout& lay,
                                  const MaskSequence& targets, const ContactSignal& tau,
                                  const Config& config, const HandGeometry& hand,
                                  std::vector<double>* grad_out = nullptr);

struct InitResult {
  ParamLayout layout;
  std::vector<double> params;
  // Phase-1 per-frame fits; grasp signals are set from the contact signal
  // (positive exactly on contact frames).
  std::vector<SceneState> frame_states;
};

// Phase 1: physics-free per-frame pose fitting under the configured camera
// (anchor frame first, then a warm-started sweep), followed by spline fitting
// to finite-difference rates of the per-frame solution.
InitResult initialize(const MaskSequence& targets, const ContactSignal& tau, const Config& config);

struct OptimizeResult {
  Trajectory trajectory;
  CameraParams camera;
  std::vector<LossHistoryEntry> history;
};

// Full pipeline: initialize, then at most config.max_iters Adam iterations on
// the total loss through the simulator. Returns the best-loss iterate; the
// trajectory is exactly the integrator output for the returned parameters.
OptimizeResult optimize(const MaskSequence& targets, const ContactSignal& tau,
                        const Config& config, std::ostream* log = nullptr);

}  // namespace trajrec
