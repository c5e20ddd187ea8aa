#pragma once

// The three loss terms over the frame grid: perceptual (mask dIoU), velocity
// regularization, and the contact consistency term tying the grasp signal to
// the hand-object distance. All are generic over the scalar so the same code
// serves the taped loss and plain-value finite-difference checks.

#include <string>
#include <vector>

#include "trajrec/physics.hpp"
#include "trajrec/render.hpp"
#include "trajrec/spline.hpp"
#include "trajrec/types.hpp"

namespace trajrec {

// Per-frame binary target masks; `static_obj` stays empty when the scene has
// no static object.
struct MaskSequence {
  std::vector<Mask> hand, object, static_obj;

  int frames() const { return static_cast<int>(hand.size()); }

  void validate() const {
    if (object.size() != hand.size())
      throw std::invalid_argument("mask sequence: hand/object frame counts differ");
    if (!static_obj.empty() && static_obj.size() != hand.size())
      throw std::invalid_argument("mask sequence: static frame count differs");
  }
};

// Hand-object contact signal, one 0/1 entry per frame.
struct ContactSignal {
  std::vector<int> tau;

  int frames() const { return static_cast<int>(tau.size()); }
};

template <class S>
struct LossTerms {
  S perceptual{0.0};
  S regularization{0.0};
  S contact{0.0};

  S total() const { return perceptual + regularization + contact; }
};

inline bool mask_nonempty(const Mask& m) { return m.support_count() >= 1; }

namespace detail {

template <class S>
bool fully_behind_camera(const std::vector<Vec3T<S>>& pts, const CameraPoseT<S>& pose) {
  const double se = std::sin(value_of(pose.elevation));
  const double ce = std::cos(value_of(pose.elevation));
  const double h = value_of(pose.height);
  for (const auto& p : pts)
    if (ce * value_of(p.y) - se * (value_of(p.z) - h) > 1e-4) return false;
  return true;
}

// dIoU of one rendered entity against its target; an entity fully behind the
// camera renders to a zero mask, whose dIoU against a nonempty target is 1.
template <class S>
S entity_term(const std::vector<Vec3T<S>>& world, const Mask& target,
              const CameraPoseT<S>& pose, const CameraParams& intr, double sigma) {
  if (fully_behind_camera(world, pose)) return S(1.0);
  return silhouette_diou(project_points(world, pose, intr), target, intr, sigma);
}

}  // namespace detail

template <class S>
S perceptual_loss(const std::vector<SceneStateT<S>>& frames, const MaskSequence& targets,
                  const CameraPoseT<S>& pose, const CameraParams& intr,
                  const HandGeometry& hand, const LossWeights& w, double sigma = 1.5) {
  targets.validate();
  if (static_cast<int>(frames.size()) != targets.frames())
    throw std::invalid_argument("perceptual_loss: frame counts differ");
  S sum{0.0};
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const SceneStateT<S>& z = frames[k];
    if (w.per_hand > 0.0 && mask_nonempty(targets.hand[k])) {
      const auto world = cylinder_silhouette_points(z.hand_pos, z.hand_rot, hand);
      sum += w.per_hand * detail::entity_term(world, targets.hand[k], pose, intr, sigma);
    }
    if (w.per_obj > 0.0 && mask_nonempty(targets.object[k])) {
      const auto world = cuboid_silhouette_points(object_cuboid(z));
      sum += w.per_obj * detail::entity_term(world, targets.object[k], pose, intr, sigma);
    }
    if (!targets.static_obj.empty() && z.has_static && w.per_static > 0.0 &&
        mask_nonempty(targets.static_obj[k])) {
      const auto world = cuboid_silhouette_points(static_cuboid(z));
      sum += w.per_static * detail::entity_term(world, targets.static_obj[k], pose, intr, sigma);
    }
  }
  return sum;
}

// Velocity regularizer. The hand rates come from the control spline at the
// frame times; the object rates are the state's own (residual) velocities,
// gated off on frames where the target object mask is nonempty.
template <class S>
S regularization_loss(const std::vector<SceneStateT<S>>& frames, const ControlSplineT<S>& spline,
                      const std::vector<double>& times, const MaskSequence& targets,
                      const LossWeights& w) {
  targets.validate();
  if (frames.size() != times.size() || static_cast<int>(frames.size()) != targets.frames())
    throw std::invalid_argument("regularization_loss: frame counts differ");
  S sum{0.0};
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const HandRatesT<S> hr = spline_eval(spline, times[k]);
    if (w.decoupled_velocity_reg) {
      sum += w.reg_hand * (squared_norm(hr.lin_vel) + squared_norm(hr.ang_vel));
    } else {
      sum += w.reg_hand * squared_norm(hr.lin_vel + hr.ang_vel);
    }
    if (!mask_nonempty(targets.object[k])) {
      const SceneStateT<S>& z = frames[k];
      if (w.decoupled_velocity_reg) {
        sum += w.reg_obj * (squared_norm(z.obj_lin_vel) + squared_norm(z.obj_ang_vel));
      } else {
        sum += w.reg_obj * squared_norm(z.obj_lin_vel + z.obj_ang_vel);
      }
    }
  }
  return sum;
}

template <class S>
S contact_loss(const std::vector<SceneStateT<S>>& frames, const HandGeometry& hand,
               const ContactSignal& tau, const LossWeights& w) {
  using std::max;
  using std::min;
  if (static_cast<int>(frames.size()) != tau.frames())
    throw std::invalid_argument("contact_loss: frame counts differ");
  S sum{0.0};
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const S g = frames[k].grasp_signal;
    if (tau.tau[k]) {
      const S d = hand_tip_object_distance(frames[k], hand);
      const S dpos = max(d, S(0.0));
      const S gneg = min(g, S(0.0));
      sum += dpos * dpos + gneg * gneg;
    } else {
      const S gpos = max(g, S(0.0));
      sum += gpos * gpos;
    }
  }
  return w.contact * sum;
}

template <class S>
LossTerms<S> total_loss(const std::vector<SceneStateT<S>>& frames,
                        const ControlSplineT<S>& spline, const std::vector<double>& times,
                        const MaskSequence& targets, const ContactSignal& tau,
                        const CameraPoseT<S>& pose, const CameraParams& intr,
                        const HandGeometry& hand, const LossWeights& w, double sigma = 1.5) {
  LossTerms<S> out;
  out.perceptual = perceptual_loss(frames, targets, pose, intr, hand, w, sigma);
  out.regularization = regularization_loss(frames, spline, times, targets, w);
  out.contact = contact_loss(frames, hand, tau, w);
  return out;
}

// One structured log line per optimizer iteration.
std::string format_loss_line(int iteration, const LossTerms<double>& terms);

}  // namespace trajrec
