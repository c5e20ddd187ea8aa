#pragma once

// Approximate hand-object dynamics: the hand is driven kinematically by the
// control spline, the object either rides the hand (grasped) or falls under
// gravity, and penalty impulses from the ground plane and the static obstacle
// push the object out of penetration. Grasp/release events are located by
// bisection and the integrator steps are taped so the whole trajectory is
// differentiable; event times themselves are treated as constants.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "trajrec/autodiff.hpp"
#include "trajrec/geometry.hpp"
#include "trajrec/linalg.hpp"
#include "trajrec/rotation.hpp"
#include "trajrec/spline.hpp"
#include "trajrec/types.hpp"

namespace trajrec {

template <class S>
struct SceneDerivT {
  Vec3T<S> hand_pos;
  Mat3T<S> hand_rot;
  S grasp_signal{0.0};
  Vec3T<S> obj_pos;
  Mat3T<S> obj_rot;
  Vec3T<S> obj_lin_vel;
  Vec3T<S> obj_ang_vel;
};

// Penalty impulse at a single boundary point. d is the signed distance to the
// obstacle, n its outward contact normal, v the point velocity.
template <class S>
struct PointImpulse {
  S magnitude{0.0};
  Vec3T<S> impulse;
};

template <class S>
PointImpulse<S> impulse_at_point(const S& d, const Vec3T<S>& n, const Vec3T<S>& v,
                                 const PhysicsParams& params) {
  using std::max;
  using std::min;
  const S vn = dot(v, n);
  PointImpulse<S> out;
  out.magnitude = max(-params.k_p * d - params.k_v * min(vn, S(0.0)), S(0.0));
  out.impulse = n * out.magnitude;
  if (value_of(out.magnitude) > 0.0) {
    const Vec3T<S> v_tang = v - n * vn;
    out.impulse = out.impulse - v_tang * params.mu;
  }
  return out;
}

template <class S>
struct ImpulseSum {
  Vec3T<S> lin;  // sum of point impulses
  Vec3T<S> ang;  // sum of q_i x j_i, q_i the offset from the object center
};

namespace detail {

// A point cannot produce an impulse when its activation -k_p*d - k_v*min(vn,0)
// is strictly negative; both max branches are then flat, so skipping the taped
// evaluation leaves gradients unchanged. The checks below run on plain values.
inline bool ground_maybe_active(double z, double vz, const PhysicsParams& p) {
  return -p.k_p * z - p.k_v * std::min(vz, 0.0) >= 0.0;
}

inline bool static_maybe_active(const Vec3& point, double speed, const Cuboid& c,
                                const PhysicsParams& p) {
  const double bound = 0.5 * norm(c.size);  // circumscribed sphere
  const double gap = norm(point - c.pos) - bound;
  if (gap > p.k_v / p.k_p * speed + 1e-9) return false;
  return -p.k_p * sdf_cuboid(point, c) - p.k_v * std::min(-speed, 0.0) >= 0.0;
}

}  // namespace detail

template <class S>
ImpulseSum<S> aggregate_impulses(const SceneStateT<S>& state, const PhysicsParams& params) {
  ImpulseSum<S> sum;
  const auto offsets = boundary_offsets(params.n_boundary_points);
  const SceneState values = to_double(state);
  const Cuboid obj_values = object_cuboid(values);
  const Cuboid static_values = values.has_static ? static_cuboid(values) : Cuboid{};
  const CuboidT<S> obj_box = object_cuboid(state);
  const CuboidT<S> static_box = state.has_static ? static_cuboid(state) : CuboidT<S>{};
  const Vec3 ng = ground_normal();
  const Vec3T<S> ground_n{S(ng.x), S(ng.y), S(ng.z)};

  for (const Vec3& off : offsets) {
    // Cheap screen on plain values before building any taped expressions.
    const BoundaryPoint bp_val =
        boundary_point_world(obj_values, off, values.obj_lin_vel, values.obj_ang_vel);
    const bool ground_active =
        detail::ground_maybe_active(bp_val.position.z, bp_val.velocity.z, params);
    const bool static_active =
        values.has_static &&
        detail::static_maybe_active(bp_val.position, norm(bp_val.velocity), static_values, params);
    if (!ground_active && !static_active) continue;

    const BoundaryPointT<S> bp =
        boundary_point_world(obj_box, off, state.obj_lin_vel, state.obj_ang_vel);
    if (ground_active) {
      const PointImpulse<S> pi = impulse_at_point(bp.position.z, ground_n, bp.velocity, params);
      sum.lin += pi.impulse;
      sum.ang += cross(bp.offset, pi.impulse);
    }
    if (static_active) {
      const S d = sdf_cuboid(bp.position, static_box);
      const Vec3T<S> n = contact_normal_cuboid(bp.position, static_box);
      const PointImpulse<S> pi = impulse_at_point(d, n, bp.velocity, params);
      sum.lin += pi.impulse;
      sum.ang += cross(bp.offset, pi.impulse);
    }
  }
  return sum;
}

template <class S>
SceneDerivT<S> scene_rhs(const SceneStateT<S>& state, const ControlSplineT<S>& spline, double t,
                         const PhysicsParams& params) {
  const HandRatesT<S> hand = spline_eval(spline, t);
  SceneDerivT<S> d;
  d.hand_pos = hand.lin_vel;
  d.hand_rot = hat(hand.ang_vel) * state.hand_rot;
  d.grasp_signal = hand.grasp_rate;

  const ImpulseSum<S> imp = aggregate_impulses(state, params);
  if (state.grasped) {
    d.obj_pos = hand.lin_vel + cross(hand.ang_vel, state.obj_pos - state.hand_pos) + state.obj_lin_vel;
    d.obj_lin_vel = state.obj_lin_vel * (-params.k_jv) + imp.lin;
    d.obj_rot = hat(hand.ang_vel + state.obj_ang_vel) * state.obj_rot;
    d.obj_ang_vel = state.obj_ang_vel * (-params.k_jw) + imp.ang;
  } else {
    d.obj_pos = state.obj_lin_vel;
    d.obj_lin_vel =
        Vec3T<S>{S(-params.gravity.x), S(-params.gravity.y), S(-params.gravity.z)} + imp.lin;
    d.obj_rot = hat(state.obj_ang_vel) * state.obj_rot;
    d.obj_ang_vel = imp.ang;
  }
  return d;
}

// Grasp guard: negative only when the hand tip touches the object while the
// grasp signal is positive.
template <class S>
S event_value(const SceneStateT<S>& state, const HandGeometry& hand) {
  using std::max;
  return max(hand_tip_object_distance(state, hand), S(-state.grasp_signal));
}

namespace detail {

template <class S>
SceneStateT<S> scene_advance(const SceneStateT<S>& s, const SceneDerivT<S>& d, double h) {
  SceneStateT<S> out = s;
  out.hand_pos = s.hand_pos + d.hand_pos * h;
  out.hand_rot = s.hand_rot + d.hand_rot * h;
  out.grasp_signal = s.grasp_signal + d.grasp_signal * h;
  out.obj_pos = s.obj_pos + d.obj_pos * h;
  out.obj_rot = s.obj_rot + d.obj_rot * h;
  out.obj_lin_vel = s.obj_lin_vel + d.obj_lin_vel * h;
  out.obj_ang_vel = s.obj_ang_vel + d.obj_ang_vel * h;
  return out;
}

// Classic RK4 step without rotation re-projection; callers reproject on commit.
template <class S>
SceneStateT<S> rk4_step(const SceneStateT<S>& state, const ControlSplineT<S>& spline, double t,
                        double h, const PhysicsParams& params) {
  const SceneDerivT<S> k1 = scene_rhs(state, spline, t, params);
  const SceneDerivT<S> k2 = scene_rhs(scene_advance(state, k1, 0.5 * h), spline, t + 0.5 * h, params);
  const SceneDerivT<S> k3 = scene_rhs(scene_advance(state, k2, 0.5 * h), spline, t + 0.5 * h, params);
  const SceneDerivT<S> k4 = scene_rhs(scene_advance(state, k3, h), spline, t + h, params);

  SceneStateT<S> out = state;
  const double c = h / 6.0;
  out.hand_pos = state.hand_pos + (k1.hand_pos + (k2.hand_pos + k3.hand_pos) * 2.0 + k4.hand_pos) * c;
  out.hand_rot = state.hand_rot + (k1.hand_rot + (k2.hand_rot + k3.hand_rot) * 2.0 + k4.hand_rot) * c;
  out.grasp_signal =
      state.grasp_signal + (k1.grasp_signal + (k2.grasp_signal + k3.grasp_signal) * 2.0 + k4.grasp_signal) * c;
  out.obj_pos = state.obj_pos + (k1.obj_pos + (k2.obj_pos + k3.obj_pos) * 2.0 + k4.obj_pos) * c;
  out.obj_rot = state.obj_rot + (k1.obj_rot + (k2.obj_rot + k3.obj_rot) * 2.0 + k4.obj_rot) * c;
  out.obj_lin_vel =
      state.obj_lin_vel + (k1.obj_lin_vel + (k2.obj_lin_vel + k3.obj_lin_vel) * 2.0 + k4.obj_lin_vel) * c;
  out.obj_ang_vel =
      state.obj_ang_vel + (k1.obj_ang_vel + (k2.obj_ang_vel + k3.obj_ang_vel) * 2.0 + k4.obj_ang_vel) * c;
  return out;
}

template <class S>
SceneStateT<S> reproject(SceneStateT<S> s) {
  s.hand_rot = project_to_so3(s.hand_rot);
  s.obj_rot = project_to_so3(s.obj_rot);
  return s;
}

template <class S>
bool state_finite(const SceneStateT<S>& s) {
  return all_finite(s.hand_pos) && all_finite(s.hand_rot) && std::isfinite(value_of(s.grasp_signal)) &&
         all_finite(s.obj_pos) && all_finite(s.obj_rot) && all_finite(s.obj_lin_vel) &&
         all_finite(s.obj_ang_vel);
}

inline ad::Tape::Mark tape_mark_if_taped(bool taped) {
  return taped && ad::active_tape() ? ad::active_tape()->mark() : ad::Tape::Mark{};
}

inline void tape_rewind_if_taped(bool taped, const ad::Tape::Mark& m) {
  if (taped && ad::active_tape()) ad::active_tape()->rewind(m);
}

}  // namespace detail

template <class S>
struct IntegrationResultT {
  std::vector<double> times;
  std::vector<SceneStateT<S>> samples;
  std::vector<EventRecord> events;
};

using IntegrationResult = IntegrationResultT<double>;

// Integrates the scene over [0, duration] with fixed RK4 steps aligned to the
// sample grid and returns n_samples states at uniform times (the first is the
// initial state). Grasp events fire when the event value crosses from positive
// to non-positive while ungrasped; release fires when the grasp signal turns
// negative while grasped. Event times are located to 1e-6 s by bisection on
// plain-value trial steps, then committed with two taped partial steps.
template <class S>
IntegrationResultT<S> integrate(const SceneStateT<S>& initial, const ControlSplineT<S>& spline,
                                const PhysicsParams& params, const HandGeometry& hand,
                                double duration, int n_samples) {
  params.validate();
  spline.validate();
  if (duration <= 0.0) throw std::invalid_argument("integrate: duration must be > 0");
  if (n_samples < 2) throw std::invalid_argument("integrate: need at least 2 samples");

  constexpr bool taped = std::is_same_v<S, ad::DVar>;
  const double sample_dt = duration / (n_samples - 1);
  const int steps_per_interval = std::max(1, static_cast<int>(std::ceil(sample_dt / params.max_step - 1e-12)));
  const double h = sample_dt / steps_per_interval;

  const ControlSpline spline_values = to_double(spline);

  IntegrationResultT<S> out;
  out.times.reserve(n_samples);
  out.samples.reserve(n_samples);

  SceneStateT<S> state = initial;

  // Trial integration on plain values from a committed state; used by the
  // event bisection so no tape nodes are created.
  auto trial_event = [&](const SceneState& from, double t_from, double t_to) {
    SceneState s = from;
    if (t_to > t_from + 1e-12)
      s = detail::reproject(detail::rk4_step(s, spline_values, t_from, t_to - t_from, params));
    return std::max(hand_tip_object_distance(s, hand), -s.grasp_signal);
  };
  auto trial_grasp_signal = [&](const SceneState& from, double t_from, double t_to) {
    SceneState s = from;
    if (t_to > t_from + 1e-12)
      s = detail::reproject(detail::rk4_step(s, spline_values, t_from, t_to - t_from, params));
    return s.grasp_signal;
  };

  auto record_event = [&](double t, EventRecord::Kind kind) {
    out.events.push_back({t, kind});
    state.grasped = kind == EventRecord::Kind::Grasp;
  };

  // Event probe on plain values; avoids taping states that are only inspected.
  auto event_now = [&](const SceneStateT<S>& s) {
    const SceneState v = to_double(s);
    return std::max(hand_tip_object_distance(v, hand), -v.grasp_signal);
  };

  // An initial state already inside the trigger region flips immediately.
  if (!state.grasped && event_now(state) <= 0.0)
    record_event(0.0, EventRecord::Kind::Grasp);
  else if (state.grasped && value_of(state.grasp_signal) < 0.0)
    record_event(0.0, EventRecord::Kind::Release);

  out.times.push_back(0.0);
  out.samples.push_back(state);

  for (int interval = 0; interval < n_samples - 1; ++interval) {
    for (int step = 0; step < steps_per_interval; ++step) {
      double t_cur = (interval * steps_per_interval + step) * h;
      const double t_end = t_cur + h;

      int flips = 0;
      while (t_end - t_cur > 1e-12) {
        const auto mark = detail::tape_mark_if_taped(taped);
        const bool was_grasped = state.grasped;
        SceneStateT<S> next =
            detail::reproject(detail::rk4_step(state, spline, t_cur, t_end - t_cur, params));
        next.grasped = was_grasped;

        double t_star = -1.0;
        EventRecord::Kind kind = EventRecord::Kind::Grasp;
        if (!was_grasped) {
          if (event_now(state) > 0.0 && event_now(next) <= 0.0) {
            kind = EventRecord::Kind::Grasp;
            const SceneState from = to_double(state);
            double lo = t_cur, hi = t_end;  // event value > 0 at lo, <= 0 at hi
            while (hi - lo > 1e-6) {
              const double mid = 0.5 * (lo + hi);
              (trial_event(from, t_cur, mid) > 0.0 ? lo : hi) = mid;
            }
            t_star = hi;
          }
        } else {
          if (value_of(state.grasp_signal) >= 0.0 && value_of(next.grasp_signal) < 0.0) {
            kind = EventRecord::Kind::Release;
            const SceneState from = to_double(state);
            double lo = t_cur, hi = t_end;  // grasp signal >= 0 at lo, < 0 at hi
            while (hi - lo > 1e-6) {
              const double mid = 0.5 * (lo + hi);
              (trial_grasp_signal(from, t_cur, mid) >= 0.0 ? lo : hi) = mid;
            }
            t_star = hi;
          }
        }

        if (t_star < 0.0) {
          state = next;
          t_cur = t_end;
        } else {
          detail::tape_rewind_if_taped(taped, mark);
          if (t_star - t_cur > 1e-9)
            state = detail::reproject(detail::rk4_step(state, spline, t_cur, t_star - t_cur, params));
          record_event(t_star, kind);
          t_cur = t_star;
          if (++flips > 8) throw std::runtime_error("integrate: event chattering near t=" + std::to_string(t_star));
        }
      }

      if (!detail::state_finite(state))
        throw std::runtime_error("integrate: state became non-finite at t=" + std::to_string(t_end));
    }
    out.times.push_back((interval + 1) * sample_dt);
    out.samples.push_back(state);
  }
  return out;
}

}  // namespace trajrec
