#pragma once

// Reverse-mode automatic differentiation on a per-thread gradient tape.
//
// DVar is a value plus a node id; arithmetic records elementary operations
// with their local partials on the active tape. Constants (id < 0) are not
// recorded, so mixed double/DVar expressions only tape what actually depends
// on a leaf. Kinked ops (min/max/abs/clamp) take the first argument's branch
// at ties. Heavy multi-input operations can be registered as CustomOp nodes
// with an analytic backward pass.

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

namespace trajrec::ad {

class Tape;

inline Tape*& active_tape_ref() noexcept {
  static thread_local Tape* tape = nullptr;
  return tape;
}

inline Tape* active_tape() noexcept { return active_tape_ref(); }
inline void set_active_tape(Tape* t) noexcept { active_tape_ref() = t; }

// Installs a tape for the current scope and restores the previous one on exit.
class TapeScope {
 public:
  explicit TapeScope(Tape* t) noexcept : prev_(active_tape()) { set_active_tape(t); }
  ~TapeScope() { set_active_tape(prev_); }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

struct DVar {
  double v = 0.0;
  std::int32_t id = -1;

  DVar() = default;
  DVar(double value) : v(value) {}  // constant, not on any tape
  bool is_const() const { return id < 0; }
};

inline double value_of(const DVar& x) { return x.v; }

// Multi-input fused operation. backward() must accumulate
// out_adj * d(output)/d(input_i) into adj[input_i's node id] for every
// non-constant input captured at construction, and return the number of
// accumulation operations it performed.
class CustomOp {
 public:
  virtual ~CustomOp() = default;
  virtual std::size_t backward(double out_adj, double* adj) const = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  DVar leaf(double value) {
    DVar out(value);
    out.id = push(-1, -1, 0.0, 0.0);
    return out;
  }

  std::size_t size() const { return nodes_.size(); }

  void clear() {
    nodes_.clear();
    custom_.clear();
    adjoint_.clear();
  }

  struct Mark {
    std::size_t nodes = 0;
    std::size_t customs = 0;
  };

  Mark mark() const { return {nodes_.size(), custom_.size()}; }

  void rewind(Mark m) {
    nodes_.resize(m.nodes);
    custom_.resize(m.customs);
  }

  // Reverse sweep from `output`; adjoints of all nodes become available
  // through grad(). Leaves not on any path to the output get gradient 0.
  void backward(const DVar& output);

  double grad(const DVar& x) const {
    if (x.is_const()) return 0.0;
    if (static_cast<std::size_t>(x.id) >= adjoint_.size())
      throw std::logic_error("tape: grad() before backward(), or node out of range");
    return adjoint_[x.id];
  }

  std::size_t last_backward_ops() const { return backward_ops_; }

  std::int32_t push(std::int32_t a, std::int32_t b, double da, double db) {
    nodes_.push_back(Node{a, b, da, db});
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }

  DVar push_custom(double value, std::unique_ptr<CustomOp> op) {
    custom_.push_back(std::move(op));
    DVar out(value);
    out.id = push(kCustomMark, static_cast<std::int32_t>(custom_.size() - 1), 0.0, 0.0);
    return out;
  }

 private:
  static constexpr std::int32_t kCustomMark = -2;

  struct Node {
    std::int32_t a = -1, b = -1;
    double da = 0.0, db = 0.0;
  };

  std::vector<Node> nodes_;
  std::vector<std::unique_ptr<CustomOp>> custom_;
  std::vector<double> adjoint_;
  std::size_t backward_ops_ = 0;
};

namespace detail {

inline Tape& require_tape() {
  Tape* t = active_tape();
  if (!t) throw std::logic_error("autodiff: operation on DVar with no active tape");
  return *t;
}

inline DVar node(double value, const DVar& x, double dx) {
  DVar out(value);
  if (!x.is_const()) out.id = require_tape().push(x.id, -1, dx, 0.0);
  return out;
}

inline DVar node(double value, const DVar& x, double dx, const DVar& y, double dy) {
  DVar out(value);
  if (x.is_const() && y.is_const()) return out;
  out.id = require_tape().push(x.id, y.id, x.is_const() ? 0.0 : dx,
                               y.is_const() ? 0.0 : dy);
  return out;
}

}  // namespace detail

inline DVar operator+(const DVar& a, const DVar& b) {
  return detail::node(a.v + b.v, a, 1.0, b, 1.0);
}
inline DVar operator-(const DVar& a, const DVar& b) {
  return detail::node(a.v - b.v, a, 1.0, b, -1.0);
}
inline DVar operator-(const DVar& a) { return detail::node(-a.v, a, -1.0); }
inline DVar operator*(const DVar& a, const DVar& b) {
  return detail::node(a.v * b.v, a, b.v, b, a.v);
}
inline DVar operator/(const DVar& a, const DVar& b) {
  if (b.v == 0.0) throw std::domain_error("autodiff: division by zero");
  const double inv = 1.0 / b.v;
  return detail::node(a.v * inv, a, inv, b, -a.v * inv * inv);
}

inline DVar& operator+=(DVar& a, const DVar& b) { a = a + b; return a; }
inline DVar& operator-=(DVar& a, const DVar& b) { a = a - b; return a; }
inline DVar& operator*=(DVar& a, const DVar& b) { a = a * b; return a; }

// Comparisons act on values; used for control flow around the taped math.
inline bool operator<(const DVar& a, const DVar& b) { return a.v < b.v; }
inline bool operator>(const DVar& a, const DVar& b) { return a.v > b.v; }
inline bool operator<=(const DVar& a, const DVar& b) { return a.v <= b.v; }
inline bool operator>=(const DVar& a, const DVar& b) { return a.v >= b.v; }

inline DVar min(const DVar& a, const DVar& b) {
  return a.v <= b.v ? detail::node(a.v, a, 1.0, b, 0.0)
                    : detail::node(b.v, a, 0.0, b, 1.0);
}
inline DVar max(const DVar& a, const DVar& b) {
  return a.v >= b.v ? detail::node(a.v, a, 1.0, b, 0.0)
                    : detail::node(b.v, a, 0.0, b, 1.0);
}
inline DVar abs(const DVar& a) {
  return a.v >= 0.0 ? detail::node(a.v, a, 1.0) : detail::node(-a.v, a, -1.0);
}
inline DVar clamp(const DVar& x, double lo, double hi) {
  if (x.v < lo) return detail::node(lo, x, 0.0);
  if (x.v > hi) return detail::node(hi, x, 0.0);
  return detail::node(x.v, x, 1.0);
}

inline DVar sqrt(const DVar& a) {
  if (a.v < 0.0) throw std::domain_error("autodiff: sqrt of negative value");
  const double r = std::sqrt(a.v);
  return detail::node(r, a, 0.5 / (r == 0.0 ? 1e-300 : r));
}
inline DVar exp(const DVar& a) {
  const double e = std::exp(a.v);
  return detail::node(e, a, e);
}
inline DVar log(const DVar& a) {
  if (a.v <= 0.0) throw std::domain_error("autodiff: log of non-positive value");
  return detail::node(std::log(a.v), a, 1.0 / a.v);
}
inline DVar sin(const DVar& a) { return detail::node(std::sin(a.v), a, std::cos(a.v)); }
inline DVar cos(const DVar& a) { return detail::node(std::cos(a.v), a, -std::sin(a.v)); }

inline DVar sigmoid(const DVar& a) {
  const double s = a.v >= 0.0 ? 1.0 / (1.0 + std::exp(-a.v))
                              : std::exp(a.v) / (1.0 + std::exp(a.v));
  return detail::node(s, a, s * (1.0 - s));
}

inline DVar softplus(const DVar& a) {
  const double v = a.v > 30.0 ? a.v : std::log1p(std::exp(a.v));
  const double s = a.v >= 0.0 ? 1.0 / (1.0 + std::exp(-a.v))
                              : std::exp(a.v) / (1.0 + std::exp(a.v));
  return detail::node(v, a, s);
}

}  // namespace trajrec::ad
