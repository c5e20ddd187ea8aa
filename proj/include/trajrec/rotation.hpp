#pragma once

// Rotation utilities: skew-symmetric (hat) operator, the 6D rotation
// parameterization, SO(3) projection used after integration steps, and
// quaternion/axis-angle conversions for trajectory export and oracles.

#include <cmath>
#include <stdexcept>

#include "trajrec/linalg.hpp"

namespace trajrec {

// hat(a) * b == a x b.
template <class S>
Mat3T<S> hat(const Vec3T<S>& v) {
  Mat3T<S> out;
  out(0, 0) = S(0.0); out(0, 1) = -v.z;   out(0, 2) = v.y;
  out(1, 0) = v.z;    out(1, 1) = S(0.0); out(1, 2) = -v.x;
  out(2, 0) = -v.y;   out(2, 1) = v.x;    out(2, 2) = S(0.0);
  return out;
}

template <class S>
struct Rot6T {
  Vec3T<S> a, b;
};

using Rot6 = Rot6T<double>;

// Gram-Schmidt of the two 3-vectors; third column completed by cross product.
// Columns of the result are the orthonormalized directions.
template <class S>
Mat3T<S> rot6_to_matrix(const Rot6T<S>& r) {
  using std::sqrt;
  const double na = std::sqrt(value_of(squared_norm(r.a)));
  if (na < 1e-12) throw std::invalid_argument("rot6_to_matrix: first vector is zero");
  Vec3T<S> c0 = r.a / norm(r.a);
  Vec3T<S> b_perp = r.b - c0 * dot(c0, r.b);
  const double nb = std::sqrt(value_of(squared_norm(b_perp)));
  if (nb < 1e-12)
    throw std::invalid_argument("rot6_to_matrix: vectors are parallel or second is zero");
  Vec3T<S> c1 = b_perp / norm(b_perp);
  Vec3T<S> c2 = cross(c0, c1);
  Mat3T<S> out;
  for (int i = 0; i < 3; ++i) {
    out(i, 0) = c0[i];
    out(i, 1) = c1[i];
    out(i, 2) = c2[i];
  }
  return out;
}

template <class S>
Rot6T<S> matrix_to_rot6(const Mat3T<S>& m) {
  return {m.col(0), m.col(1)};
}

// Nearest-rotation projection via Gram-Schmidt on the columns. Used to keep
// integrated rotation states on SO(3); the input is a slightly drifted
// rotation, so orthonormalization stays well conditioned.
template <class S>
Mat3T<S> project_to_so3(const Mat3T<S>& m) {
  const Mat3 mv = to_double(m);
  const double det = mv(0, 0) * (mv(1, 1) * mv(2, 2) - mv(1, 2) * mv(2, 1)) -
                     mv(0, 1) * (mv(1, 0) * mv(2, 2) - mv(1, 2) * mv(2, 0)) +
                     mv(0, 2) * (mv(1, 0) * mv(2, 1) - mv(1, 1) * mv(2, 0));
  if (std::abs(det) < 1e-12)
    throw std::invalid_argument("project_to_so3: singular matrix");
  return rot6_to_matrix(Rot6T<S>{m.col(0), m.col(1)});
}

inline bool is_rotation(const Mat3& m, double tol = 1e-6) {
  const Mat3 err = m.transpose() * m - Mat3::identity();
  if (frobenius_norm(err) >= tol) return false;
  const double det = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
                     m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
                     m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
  return std::abs(det - 1.0) < tol;
}

// Rodrigues formula.
inline Mat3 rotation_exp(const Vec3& w) {
  const double th = norm(w);
  if (th < 1e-12) return Mat3::identity() + hat(w);
  const Vec3 axis = w / th;
  const Mat3 k = hat(axis);
  return Mat3::identity() + std::sin(th) * k + (1.0 - std::cos(th)) * (k * k);
}

// Axis-angle vector of a rotation matrix.
inline Vec3 rotation_log(const Mat3& r) {
  const double c = std::min(1.0, std::max(-1.0, (r(0, 0) + r(1, 1) + r(2, 2) - 1.0) / 2.0));
  const double th = std::acos(c);
  Vec3 w{r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)};
  if (th < 1e-8) return 0.5 * w;
  if (th > M_PI - 1e-6) {
    // Near pi the skew part vanishes; recover the axis from the symmetric part.
    Vec3 axis;
    double best = -1.0;
    for (int i = 0; i < 3; ++i) {
      const double d = r(i, i) - c;
      if (d > best) {
        best = d;
        axis = Vec3{(r(i, 0) + r(0, i)) / 2.0, (r(i, 1) + r(1, i)) / 2.0,
                    (r(i, 2) + r(2, i)) / 2.0};
        axis[i] = (axis[i] + (1.0 - c)) / 2.0;
      }
    }
    const double n = norm(axis);
    if (n < 1e-12) return {th, 0.0, 0.0};
    axis = axis / n;
    if (w.x * axis.x + w.y * axis.y + w.z * axis.z < 0.0) axis = -axis;
    return axis * th;
  }
  return w * (th / (2.0 * std::sin(th)));
}

inline Mat3 rotation_about_z(double yaw) {
  return rotation_exp(Vec3{0.0, 0.0, yaw});
}

template <class S>
Mat3T<S> rotation_about_z_t(const S& yaw) {
  using std::sin;
  using std::cos;
  Mat3T<S> out = Mat3T<S>::identity();
  out(0, 0) = cos(yaw); out(0, 1) = -sin(yaw);
  out(1, 0) = sin(yaw); out(1, 1) = cos(yaw);
  return out;
}

struct Quat {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;
};

inline Quat matrix_to_quat(const Mat3& r) {
  Quat q;
  const double tr = r(0, 0) + r(1, 1) + r(2, 2);
  if (tr > 0.0) {
    double s = std::sqrt(tr + 1.0) * 2.0;
    q.w = 0.25 * s;
    q.x = (r(2, 1) - r(1, 2)) / s;
    q.y = (r(0, 2) - r(2, 0)) / s;
    q.z = (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
    q.w = (r(2, 1) - r(1, 2)) / s;
    q.x = 0.25 * s;
    q.y = (r(0, 1) + r(1, 0)) / s;
    q.z = (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
    q.w = (r(0, 2) - r(2, 0)) / s;
    q.x = (r(0, 1) + r(1, 0)) / s;
    q.y = 0.25 * s;
    q.z = (r(1, 2) + r(2, 1)) / s;
  } else {
    double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
    q.w = (r(1, 0) - r(0, 1)) / s;
    q.x = (r(0, 2) + r(2, 0)) / s;
    q.y = (r(1, 2) + r(2, 1)) / s;
    q.z = 0.25 * s;
  }
  return q;
}

inline Mat3 quat_to_matrix(const Quat& q) {
  Mat3 r;
  const double xx = q.x * q.x, yy = q.y * q.y, zz = q.z * q.z;
  const double xy = q.x * q.y, xz = q.x * q.z, yz = q.y * q.z;
  const double wx = q.w * q.x, wy = q.w * q.y, wz = q.w * q.z;
  r(0, 0) = 1.0 - 2.0 * (yy + zz);
  r(0, 1) = 2.0 * (xy - wz);
  r(0, 2) = 2.0 * (xz + wy);
  r(1, 0) = 2.0 * (xy + wz);
  r(1, 1) = 1.0 - 2.0 * (xx + zz);
  r(1, 2) = 2.0 * (yz - wx);
  r(2, 0) = 2.0 * (xz - wy);
  r(2, 1) = 2.0 * (yz + wx);
  r(2, 2) = 1.0 - 2.0 * (xx + yy);
  return r;
}

}  // namespace trajrec
