#pragma once

// Catmull-Rom spline over the hand control values: linear velocity, angular
// velocity and the grasp-signal rate. Uniform knots on [0, duration];
// evaluation clamps outside the range and is linear in the control points.

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "trajrec/linalg.hpp"

namespace trajrec {

template <class S>
struct HandRatesT {
  Vec3T<S> lin_vel;
  Vec3T<S> ang_vel;
  S grasp_rate{0.0};
};

template <class S>
struct ControlSplineT {
  // Control point layout: v.x v.y v.z w.x w.y w.z gdot.
  std::vector<std::array<S, 7>> points;
  double duration = 1.0;

  int size() const { return static_cast<int>(points.size()); }

  void validate() const {
    if (points.size() < 2) throw std::invalid_argument("spline: need at least 2 control points");
    if (duration <= 0.0) throw std::invalid_argument("spline: duration must be > 0");
  }
};

using ControlSpline = ControlSplineT<double>;

template <class S>
ControlSpline to_double(const ControlSplineT<S>& s) {
  ControlSpline out;
  out.duration = s.duration;
  out.points.resize(s.points.size());
  for (std::size_t i = 0; i < s.points.size(); ++i)
    for (int j = 0; j < 7; ++j) out.points[i][j] = value_of(s.points[i][j]);
  return out;
}

template <class S>
HandRatesT<S> spline_eval(const ControlSplineT<S>& spline, double t) {
  const int n = spline.size();
  if (n < 2) throw std::invalid_argument("spline: need at least 2 control points");
  const double delta = spline.duration / (n - 1);

  std::array<S, 7> value;
  if (t <= 0.0) {
    value = spline.points.front();
  } else if (t >= spline.duration) {
    value = spline.points.back();
  } else {
    int seg = static_cast<int>(t / delta);
    if (seg > n - 2) seg = n - 2;
    const double u = (t - seg * delta) / delta;
    const double u2 = u * u, u3 = u2 * u;
    const double h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    const double h10 = u3 - 2.0 * u2 + u;
    const double h01 = -2.0 * u3 + 3.0 * u2;
    const double h11 = u3 - u2;

    for (int c = 0; c < 7; ++c) {
      const S& p0 = spline.points[seg][c];
      const S& p1 = spline.points[seg + 1][c];
      // One-sided tangents at the end knots, central differences inside.
      const S m0 = seg > 0 ? (p1 - spline.points[seg - 1][c]) * (0.5 / delta)
                           : (p1 - p0) * (1.0 / delta);
      const S m1 = seg + 2 < n ? (spline.points[seg + 2][c] - p0) * (0.5 / delta)
                               : (p1 - p0) * (1.0 / delta);
      value[c] = p0 * h00 + m0 * (h10 * delta) + p1 * h01 + m1 * (h11 * delta);
    }
  }

  HandRatesT<S> out;
  out.lin_vel = {value[0], value[1], value[2]};
  out.ang_vel = {value[3], value[4], value[5]};
  out.grasp_rate = value[6];
  return out;
}

}  // namespace trajrec
