#include <cmath>
#include <random>

#include "doctest.h"
#include "trajrec/autodiff.hpp"
#include "trajrec/linalg.hpp"

using namespace trajrec::ad;

TEST_CASE("basic derivatives") {
  Tape tape;
  TapeScope scope(&tape);

  SUBCASE("d/dx x*x at 3 is 6") {
    DVar x = tape.leaf(3.0);
    DVar y = x * x;
    tape.backward(y);
    CHECK(y.v == doctest::Approx(9.0));
    CHECK(tape.grad(x) == doctest::Approx(6.0));
  }

  SUBCASE("product and chain rule") {
    DVar x = tape.leaf(0.7);
    DVar y = sin(x) * exp(x);
    tape.backward(y);
    const double expect = std::cos(0.7) * std::exp(0.7) + std::sin(0.7) * std::exp(0.7);
    CHECK(tape.grad(x) == doctest::Approx(expect));
  }

  SUBCASE("quotient rule") {
    DVar x = tape.leaf(2.0);
    DVar y = tape.leaf(5.0);
    DVar q = x / y;
    tape.backward(q);
    CHECK(tape.grad(x) == doctest::Approx(1.0 / 5.0));
    CHECK(tape.grad(y) == doctest::Approx(-2.0 / 25.0));
  }

  SUBCASE("unused leaves get zero gradient") {
    DVar x = tape.leaf(1.0);
    DVar z = tape.leaf(4.0);
    DVar y = x + 1.0;
    tape.backward(y);
    CHECK(tape.grad(z) == 0.0);
  }

  SUBCASE("constants contribute no nodes") {
    const std::size_t before = tape.size();
    DVar c(2.5);
    DVar d = c * DVar(4.0);
    CHECK(d.is_const());
    CHECK(tape.size() == before);
    DVar x = tape.leaf(1.0);
    DVar y = x * 3.0 + 1.0;  // mixed: one node per op involving x
    tape.backward(y);
    CHECK(tape.grad(x) == doctest::Approx(3.0));
  }
}

TEST_CASE("kinked operations take the first argument's branch at ties") {
  Tape tape;
  TapeScope scope(&tape);
  DVar a = tape.leaf(1.0);
  DVar b = tape.leaf(1.0);

  DVar mn = min(a, b);
  tape.backward(mn);
  CHECK(tape.grad(a) == 1.0);
  CHECK(tape.grad(b) == 0.0);

  DVar mx = max(a, b);
  tape.backward(mx);
  CHECK(tape.grad(a) == 1.0);
  CHECK(tape.grad(b) == 0.0);

  DVar z = tape.leaf(0.0);
  DVar ab = abs(z);  // tie at zero: uses the non-negative branch
  tape.backward(ab);
  CHECK(tape.grad(z) == 1.0);
}

TEST_CASE("clamp is flat outside the interval") {
  Tape tape;
  TapeScope scope(&tape);
  DVar x = tape.leaf(5.0);
  DVar y = clamp(x, -1.0, 1.0);
  CHECK(y.v == 1.0);
  tape.backward(y);
  CHECK(tape.grad(x) == 0.0);

  DVar x2 = tape.leaf(0.25);
  DVar y2 = clamp(x2, -1.0, 1.0);
  tape.backward(y2);
  CHECK(tape.grad(x2) == 1.0);
}

TEST_CASE("domain errors") {
  Tape tape;
  TapeScope scope(&tape);
  DVar x = tape.leaf(-1.0);
  CHECK_THROWS_AS(sqrt(x), std::domain_error);
  CHECK_THROWS_AS(log(x), std::domain_error);
  DVar zero = tape.leaf(0.0);
  CHECK_THROWS_AS(x / zero, std::domain_error);
}

TEST_CASE("gradients match central finite differences") {
  // Smooth scalar function of four variables exercising most taped ops.
  auto f = [](const auto& x0, const auto& x1, const auto& x2, const auto& x3) {
    using std::sqrt;
    using std::exp;
    using std::log;
    using std::sin;
    using std::cos;
    using trajrec::sigmoid;
    using trajrec::softplus;
    auto a = x0 * x1 + sin(x2) * cos(x3);
    auto b = exp(x0 * 0.3) / (x1 + 2.0);
    auto c = log(x2 + 3.0) * sqrt(x3 + 4.0);
    return a * a + b * c + sigmoid(x0) + softplus(x1);
  };

  std::mt19937 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double h = 1e-6;
  for (int trial = 0; trial < 10; ++trial) {
    double x[4] = {u(rng), u(rng), u(rng), u(rng)};
    Tape tape;
    TapeScope scope(&tape);
    DVar v[4] = {tape.leaf(x[0]), tape.leaf(x[1]), tape.leaf(x[2]), tape.leaf(x[3])};
    DVar y = f(v[0], v[1], v[2], v[3]);
    tape.backward(y);
    for (int i = 0; i < 4; ++i) {
      double xp[4], xm[4];
      for (int k = 0; k < 4; ++k) xp[k] = xm[k] = x[k];
      xp[i] += h;
      xm[i] -= h;
      const double fd = (f(xp[0], xp[1], xp[2], xp[3]) - f(xm[0], xm[1], xm[2], xm[3])) / (2.0 * h);
      const double g = tape.grad(v[i]);
      CHECK(g == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("tape lifecycle") {
  SUBCASE("clear resets the tape for reuse") {
    Tape tape;
    TapeScope scope(&tape);
    DVar x = tape.leaf(2.0);
    DVar y = x * x;
    tape.backward(y);
    tape.clear();
    CHECK(tape.size() == 0);
    DVar x2 = tape.leaf(4.0);
    DVar y2 = x2 * x2 * x2;
    tape.backward(y2);
    CHECK(tape.grad(x2) == doctest::Approx(48.0));
  }

  SUBCASE("mark and rewind drop trailing nodes") {
    Tape tape;
    TapeScope scope(&tape);
    DVar x = tape.leaf(1.5);
    const Tape::Mark m = tape.mark();
    for (int i = 0; i < 100; ++i) (void)(x * x);
    CHECK(tape.size() > m.nodes);
    tape.rewind(m);
    CHECK(tape.size() == m.nodes);
    DVar y = x + x;
    tape.backward(y);
    CHECK(tape.grad(x) == doctest::Approx(2.0));
  }

  SUBCASE("scopes nest and restore") {
    Tape outer;
    TapeScope so(&outer);
    CHECK(active_tape() == &outer);
    {
      Tape inner;
      TapeScope si(&inner);
      CHECK(active_tape() == &inner);
    }
    CHECK(active_tape() == &outer);
  }

  SUBCASE("taped math without an active tape is an error") {
    Tape tape;
    DVar x;
    {
      TapeScope scope(&tape);
      x = tape.leaf(1.0);
    }
    CHECK(active_tape() == nullptr);
    CHECK_THROWS_AS(x * x, std::logic_error);
  }

  SUBCASE("grad before backward is an error") {
    Tape tape;
    TapeScope scope(&tape);
    DVar x = tape.leaf(1.0);
    CHECK_THROWS_AS(tape.grad(x), std::logic_error);
  }

  SUBCASE("backward on a constant clears adjoints and returns") {
    Tape tape;
    TapeScope scope(&tape);
    DVar x = tape.leaf(1.0);
    (void)(x + x);
    tape.backward(DVar(3.0));
    CHECK(tape.grad(x) == 0.0);
  }
}

namespace {

// Three-input product with an analytic backward pass.
class TripleProduct : public CustomOp {
 public:
  TripleProduct(const DVar& a, const DVar& b, const DVar& c)
      : ia_(a.id), ib_(b.id), ic_(c.id), va_(a.v), vb_(b.v), vc_(c.v) {}

  std::size_t backward(double out_adj, double* adj) const override {
    std::size_t ops = 0;
    if (ia_ >= 0) { adj[ia_] += out_adj * vb_ * vc_; ++ops; }
    if (ib_ >= 0) { adj[ib_] += out_adj * va_ * vc_; ++ops; }
    if (ic_ >= 0) { adj[ic_] += out_adj * va_ * vb_; ++ops; }
    return ops;
  }

 private:
  std::int32_t ia_, ib_, ic_;
  double va_, vb_, vc_;
};

}  // namespace

TEST_CASE("custom operations participate in the reverse sweep") {
  Tape tape;
  TapeScope scope(&tape);
  DVar a = tape.leaf(2.0);
  DVar b = tape.leaf(3.0);
  DVar c = tape.leaf(5.0);
  DVar p = tape.push_custom(a.v * b.v * c.v, std::make_unique<TripleProduct>(a, b, c));
  DVar y = p * p;
  tape.backward(y);
  CHECK(y.v == doctest::Approx(900.0));
  CHECK(tape.grad(a) == doctest::Approx(2.0 * 30.0 * 15.0));
  CHECK(tape.grad(b) == doctest::Approx(2.0 * 30.0 * 10.0));
  CHECK(tape.grad(c) == doctest::Approx(2.0 * 30.0 * 6.0));
  CHECK(tape.last_backward_ops() > 0);
}
