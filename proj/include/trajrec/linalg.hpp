#pragma once

// Small fixed-size linear algebra templated on the scalar type, so the same
// geometry/physics code runs on plain doubles and on autodiff variables.

#include <array>
#include <cmath>
#include <cstddef>
#include <type_traits>

namespace trajrec {

inline double value_of(double s) { return s; }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

// Inverse of softplus, used to seed raw parameters from positive sizes.
inline double softplus_inverse(double y) {
  if (y > 30.0) return y;
  return std::log(std::expm1(y));
}

template <class S>
struct Vec3T {
  S x{0.0}, y{0.0}, z{0.0};

  Vec3T() = default;
  Vec3T(S xx, S yy, S zz) : x(xx), y(yy), z(zz) {}

  S& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  const S& operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  Vec3T operator+(const Vec3T& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3T operator-(const Vec3T& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3T operator-() const { return {-x, -y, -z}; }
  Vec3T operator*(const S& s) const { return {x * s, y * s, z * s}; }
  Vec3T operator/(const S& s) const { return {x / s, y / s, z / s}; }
  Vec3T& operator+=(const Vec3T& o) {
    x = x + o.x; y = y + o.y; z = z + o.z;
    return *this;
  }
  Vec3T& operator-=(const Vec3T& o) {
    x = x - o.x; y = y - o.y; z = z - o.z;
    return *this;
  }
};

template <class S>
Vec3T<S> operator*(const S& s, const Vec3T<S>& v) { return v * s; }

template <class S, class = std::enable_if_t<!std::is_same_v<S, double>>>
Vec3T<S> operator*(double s, const Vec3T<S>& v) { return v * S(s); }

template <class S>
S dot(const Vec3T<S>& a, const Vec3T<S>& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <class S>
Vec3T<S> cross(const Vec3T<S>& a, const Vec3T<S>& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <class S>
S squared_norm(const Vec3T<S>& v) { return dot(v, v); }

template <class S>
S norm(const Vec3T<S>& v) {
  using std::sqrt;
  return sqrt(dot(v, v));
}

// Row-major 3x3 matrix.
template <class S>
struct Mat3T {
  std::array<S, 9> m{S(0.0), S(0.0), S(0.0), S(0.0), S(0.0),
                     S(0.0), S(0.0), S(0.0), S(0.0)};

  S& operator()(int r, int c) { return m[3 * r + c]; }
  const S& operator()(int r, int c) const { return m[3 * r + c]; }

  static Mat3T identity() {
    Mat3T out;
    out(0, 0) = S(1.0); out(1, 1) = S(1.0); out(2, 2) = S(1.0);
    return out;
  }

  Mat3T operator+(const Mat3T& o) const {
    Mat3T out;
    for (int i = 0; i < 9; ++i) out.m[i] = m[i] + o.m[i];
    return out;
  }
  Mat3T operator-(const Mat3T& o) const {
    Mat3T out;
    for (int i = 0; i < 9; ++i) out.m[i] = m[i] - o.m[i];
    return out;
  }
  Mat3T operator*(const S& s) const {
    Mat3T out;
    for (int i = 0; i < 9; ++i) out.m[i] = m[i] * s;
    return out;
  }

  Vec3T<S> operator*(const Vec3T<S>& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  Mat3T operator*(const Mat3T& o) const {
    Mat3T out;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        out(r, c) = (*this)(r, 0) * o(0, c) + (*this)(r, 1) * o(1, c) +
                    (*this)(r, 2) * o(2, c);
    return out;
  }

  Mat3T transpose() const {
    Mat3T out;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) out(r, c) = (*this)(c, r);
    return out;
  }

  Vec3T<S> row(int r) const { return {m[3 * r], m[3 * r + 1], m[3 * r + 2]}; }
  Vec3T<S> col(int c) const { return {m[c], m[3 + c], m[6 + c]}; }
};

template <class S>
Mat3T<S> operator*(double s, const Mat3T<S>& a) { return a * S(s); }

using Vec3 = Vec3T<double>;
using Mat3 = Mat3T<double>;

inline Vec3 to_double(const Vec3& v) { return v; }
inline Mat3 to_double(const Mat3& m) { return m; }

template <class S>
Vec3 to_double(const Vec3T<S>& v) {
  return {value_of(v.x), value_of(v.y), value_of(v.z)};
}

template <class S>
Mat3 to_double(const Mat3T<S>& a) {
  Mat3 out;
  for (int i = 0; i < 9; ++i) out.m[i] = value_of(a.m[i]);
  return out;
}

inline double frobenius_norm(const Mat3& a) {
  double s = 0.0;
  for (double v : a.m) s += v * v;
  return std::sqrt(s);
}

template <class S>
bool all_finite(const Vec3T<S>& v) {
  return std::isfinite(value_of(v.x)) && std::isfinite(value_of(v.y)) &&
         std::isfinite(value_of(v.z));
}

template <class S>
bool all_finite(const Mat3T<S>& a) {
  for (const S& v : a.m)
    if (!std::isfinite(value_of(v))) return false;
  return true;
}

}  // namespace trajrec
