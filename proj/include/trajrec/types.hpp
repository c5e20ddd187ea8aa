#pragma once

// Shared domain types: scene state, camera, hand and physics constants,
// loss weights, and the trajectory container produced by integration.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "trajrec/linalg.hpp"
#include "trajrec/rotation.hpp"

namespace trajrec {

struct CameraParams {
  double height = 0.35;                  // m above the ground plane
  double elevation = 15.0 * M_PI / 180.0;  // rad, pitch below the horizon
  double fov = 60.0 * M_PI / 180.0;      // horizontal field of view, fixed
  int image_w = 128;
  int image_h = 96;

  void validate() const {
    if (!(fov > 0.0 && fov < M_PI)) throw std::invalid_argument("camera: fov out of (0, pi)");
    if (image_w < 8 || image_h < 8) throw std::invalid_argument("camera: image dims < 8");
  }
};

struct HandGeometry {
  double length = 0.40;  // m, cylinder length
  double radius = 0.04;  // m, cylinder radius

  void validate() const {
    if (length <= 0.0 || radius <= 0.0)
      throw std::invalid_argument("hand geometry: dimensions must be positive");
  }
};

struct PhysicsParams {
  Vec3 gravity{0.0, 0.0, 9.81};  // enters object acceleration as -gravity
  double k_p = 1000.0;           // collision stiffness
  double k_v = 50.0;             // collision damping
  double mu = 5.0;               // tangential friction-like coefficient
  double k_jv = 20.0;            // grasped linear-velocity decay
  double k_jw = 20.0;            // grasped angular-velocity decay
  int n_boundary_points = 26;    // 8 corners + 12 edge midpoints + 6 face centers
  double max_step = 1.0 / 300.0; // integrator step upper bound, s

  void validate() const {
    if (k_p <= 0.0 || k_v <= 0.0) throw std::invalid_argument("physics: k_p, k_v must be > 0");
    if (mu < 0.0) throw std::invalid_argument("physics: mu must be >= 0");
    if (k_jv <= 0.0 || k_jw <= 0.0) throw std::invalid_argument("physics: decay constants must be > 0");
    if (n_boundary_points < 8) throw std::invalid_argument("physics: need at least 8 boundary points");
    if (max_step <= 0.0) throw std::invalid_argument("physics: max_step must be > 0");
  }
};

struct LossWeights {
  double per_hand = 1.0;
  double per_obj = 1.0;
  double per_static = 1.0;
  double reg_obj = 1e-2;
  double reg_hand = 1e-2;
  double contact = 10.0;
  // The printed regularizer uses ||v + w||^2; this switches to ||v||^2 + ||w||^2.
  bool decoupled_velocity_reg = false;

  void validate() const {
    if (per_hand < 0 || per_obj < 0 || per_static < 0 || reg_obj < 0 || reg_hand < 0 ||
        contact < 0)
      throw std::invalid_argument("loss weights must be >= 0");
    if (per_hand == 0 && per_obj == 0 && per_static == 0)
      throw std::invalid_argument("at least one perceptual weight must be > 0");
  }
};

// Full scene state. Sizes and the static-object pose are constant in time but
// carried along so that a single state value describes the whole scene.
template <class S>
struct SceneStateT {
  Vec3T<S> hand_pos;
  Mat3T<S> hand_rot = Mat3T<S>::identity();
  S grasp_signal{0.0};

  Vec3T<S> obj_pos;
  Mat3T<S> obj_rot = Mat3T<S>::identity();
  Vec3T<S> obj_size{S(0.06), S(0.06), S(0.06)};  // full edge lengths, m
  Vec3T<S> obj_lin_vel;
  Vec3T<S> obj_ang_vel;

  bool has_static = false;
  Vec3T<S> static_pos;      // bottom face on the ground: z == static_size.z / 2
  S static_yaw{0.0};
  Vec3T<S> static_size{S(0.09), S(0.09), S(0.09)};

  bool grasped = false;
};

using SceneState = SceneStateT<double>;

template <class S>
SceneState to_double(const SceneStateT<S>& s) {
  SceneState out;
  out.hand_pos = to_double(s.hand_pos);
  out.hand_rot = to_double(s.hand_rot);
  out.grasp_signal = value_of(s.grasp_signal);
  out.obj_pos = to_double(s.obj_pos);
  out.obj_rot = to_double(s.obj_rot);
  out.obj_size = to_double(s.obj_size);
  out.obj_lin_vel = to_double(s.obj_lin_vel);
  out.obj_ang_vel = to_double(s.obj_ang_vel);
  out.has_static = s.has_static;
  out.static_pos = to_double(s.static_pos);
  out.static_yaw = value_of(s.static_yaw);
  out.static_size = to_double(s.static_size);
  out.grasped = s.grasped;
  return out;
}

struct EventRecord {
  double time = 0.0;
  enum class Kind { Grasp, Release } kind = Kind::Grasp;
};

inline const char* to_string(EventRecord::Kind k) {
  return k == EventRecord::Kind::Grasp ? "grasp" : "release";
}

// Time-sampled scene states plus the discrete grasp events.
struct Trajectory {
  std::vector<double> times;
  std::vector<SceneState> samples;
  std::vector<EventRecord> events;
  HandGeometry hand;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

// Hand tip: end-cap center along the hand's local +x axis.
template <class S>
Vec3T<S> hand_tip(const Vec3T<S>& hand_pos, const Mat3T<S>& hand_rot,
                  const HandGeometry& geom) {
  return hand_pos + hand_rot * Vec3T<S>{S(geom.length / 2.0), S(0.0), S(0.0)};
}

inline Vec3 hand_tip(const SceneState& s, const HandGeometry& geom) {
  return hand_tip(s.hand_pos, s.hand_rot, geom);
}

}  // namespace trajrec
