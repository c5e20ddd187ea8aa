#include <cmath>

#include "doctest.h"
#include "trajrec/physics.hpp"

using namespace trajrec;

namespace {

ControlSpline constant_controls(double duration, const Vec3& v, const Vec3& w, double gdot) {
  ControlSpline s;
  s.duration = duration;
  s.points.assign(2, {v.x, v.y, v.z, w.x, w.y, w.z, gdot});
  return s;
}

// Object alone in free space; hand parked far away with the grasp disabled.
SceneState falling_object(double z0) {
  SceneState s;
  s.hand_pos = {0.0, 5.0, 2.0};
  s.grasp_signal = -1.0;
  s.obj_pos = {0.0, 0.6, z0};
  s.obj_size = {0.05, 0.05, 0.05};
  return s;
}

}  // namespace

TEST_CASE("spline evaluation") {
  SUBCASE("interpolates its control points at the knots") {
    ControlSpline s;
    s.duration = 3.0;
    s.points = {{1, 2, 3, 4, 5, 6, 7}, {-1, 0, 1, 2, 3, 4, 5}, {0, 0, 0, 0, 0, 0, 9}, {2, 2, 2, 2, 2, 2, 2}};
    for (int k = 0; k < 4; ++k) {
      const HandRatesT<double> r = spline_eval(s, k * 1.0);
      CHECK(r.lin_vel.x == doctest::Approx(s.points[k][0]));
      CHECK(r.ang_vel.z == doctest::Approx(s.points[k][5]));
      CHECK(r.grasp_rate == doctest::Approx(s.points[k][6]));
    }
  }

  SUBCASE("reproduces linear control data exactly between knots") {
    ControlSpline s;
    s.duration = 2.0;
    for (int k = 0; k < 5; ++k) {
      const double t = 2.0 * k / 4.0;
      s.points.push_back({1.0 + 2.0 * t, -t, 0.5 * t, 0.0, t, 3.0, 4.0 - t});
    }
    for (double t : {0.13, 0.5, 0.77, 1.3, 1.9}) {
      const HandRatesT<double> r = spline_eval(s, t);
      CHECK(r.lin_vel.x == doctest::Approx(1.0 + 2.0 * t));
      CHECK(r.lin_vel.y == doctest::Approx(-t));
      CHECK(r.ang_vel.y == doctest::Approx(t));
      CHECK(r.grasp_rate == doctest::Approx(4.0 - t));
    }
  }

  SUBCASE("clamps outside the time range") {
    ControlSpline s;
    s.duration = 1.0;
    s.points = {{1, 0, 0, 0, 0, 0, 0}, {5, 0, 0, 0, 0, 0, 0}};
    CHECK(spline_eval(s, -2.0).lin_vel.x == doctest::Approx(1.0));
    CHECK(spline_eval(s, 7.0).lin_vel.x == doctest::Approx(5.0));
  }

  SUBCASE("continuous at interior knots") {
    ControlSpline s;
    s.duration = 1.0;
    s.points = {{0, 0, 0, 0, 0, 0, 0}, {3, 0, 0, 0, 0, 0, 0}, {-1, 0, 0, 0, 0, 0, 0}};
    const double eps = 1e-9;
    CHECK(spline_eval(s, 0.5 - eps).lin_vel.x ==
          doctest::Approx(spline_eval(s, 0.5 + eps).lin_vel.x).epsilon(1e-6));
  }

  SUBCASE("rejects degenerate configurations") {
    ControlSpline s;
    s.points = {{0, 0, 0, 0, 0, 0, 0}};
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.points.push_back({0, 0, 0, 0, 0, 0, 0});
    s.duration = 0.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  }
}

TEST_CASE("penalty impulse at a point") {
  PhysicsParams params;  // k_p 1000, k_v 50, mu 5
  const Vec3 up{0.0, 0.0, 1.0};

  SUBCASE("static penetration pushes along the normal") {
    const PointImpulse<double> pi = impulse_at_point(-0.01, up, Vec3{0, 0, 0}, params);
    CHECK(pi.magnitude == doctest::Approx(10.0));
    CHECK(pi.impulse.z == doctest::Approx(10.0));
    CHECK(pi.impulse.x == doctest::Approx(0.0));
  }

  SUBCASE("approach speed adds damping, tangential motion adds friction") {
    const PointImpulse<double> pi = impulse_at_point(-0.01, up, Vec3{1.0, 0.0, -1.0}, params);
    CHECK(pi.magnitude == doctest::Approx(1000.0 * 0.01 + 50.0 * 1.0));
    CHECK(pi.impulse.z == doctest::Approx(60.0));
    CHECK(pi.impulse.x == doctest::Approx(-5.0 * 1.0));  // -mu * tangential velocity
  }

  SUBCASE("separating velocity is not damped") {
    const PointImpulse<double> pi = impulse_at_point(-0.01, up, Vec3{0.0, 0.0, 2.0}, params);
    CHECK(pi.magnitude == doctest::Approx(10.0));
  }

  SUBCASE("no impulse without activation") {
    const PointImpulse<double> pi = impulse_at_point(0.02, up, Vec3{3.0, 0.0, 0.5}, params);
    CHECK(pi.magnitude == 0.0);
    CHECK(pi.impulse.x == 0.0);  // friction only acts with a positive normal impulse
    CHECK(pi.impulse.z == 0.0);
  }

  SUBCASE("fast approach activates slightly before contact") {
    const PointImpulse<double> pi = impulse_at_point(0.005, up, Vec3{0.0, 0.0, -1.0}, params);
    CHECK(pi.magnitude == doctest::Approx(-1000.0 * 0.005 + 50.0));
  }
}

TEST_CASE("aggregated ground impulses on a penetrating cube") {
  PhysicsParams params;
  SceneState s = falling_object(0.024);  // 5 cm cube, bottom 1 mm below ground

  const ImpulseSum<double> sum = aggregate_impulses(s, params);
  // 9 of the 26 sample points lie on the bottom face (4 corners, 4 edge
  // midpoints, 1 face center), each 1 mm deep.
  CHECK(sum.lin.z == doctest::Approx(9.0 * 1000.0 * 0.001));
  CHECK(sum.lin.x == doctest::Approx(0.0));
  CHECK(norm(sum.ang) < 1e-12);

  SUBCASE("no contact, no impulse") {
    s.obj_pos.z = 0.5;
    const ImpulseSum<double> free_sum = aggregate_impulses(s, params);
    CHECK(norm(free_sum.lin) == 0.0);
    CHECK(norm(free_sum.ang) == 0.0);
  }

  SUBCASE("static obstacle contributes when penetrated") {
    s.obj_pos = {0.3, 0.6, 0.2};
    s.has_static = true;
    s.static_size = {0.1, 0.1, 0.4};
    s.static_pos = {0.3, 0.6, 0.2};  // object center inside the static
    const ImpulseSum<double> st = aggregate_impulses(s, params);
    CHECK(norm(st.lin) > 0.0);
  }
}

TEST_CASE("scene dynamics") {
  PhysicsParams params;
  const HandGeometry hand;

  SUBCASE("ungrasped object accelerates downward") {
    SceneState s = falling_object(0.5);
    s.obj_lin_vel = {0.1, 0.0, 0.0};
    const ControlSpline ctl = constant_controls(1.0, {0, 0, 0}, {0, 0, 0}, 0.0);
    const SceneDerivT<double> d = scene_rhs(s, ctl, 0.0, params);
    CHECK(d.obj_pos.x == doctest::Approx(0.1));
    CHECK(d.obj_lin_vel.z == doctest::Approx(-9.81));
    CHECK(d.obj_lin_vel.x == doctest::Approx(0.0));
  }

  SUBCASE("grasped object rides the hand") {
    SceneState s;
    s.hand_pos = {0.0, 0.0, 0.5};
    s.obj_pos = {0.2, 0.0, 0.5};
    s.grasped = true;
    s.grasp_signal = 1.0;
    const Vec3 w{0.0, 0.0, 1.0};
    const ControlSpline ctl = constant_controls(1.0, {0.3, 0, 0}, w, 0.0);
    const SceneDerivT<double> d = scene_rhs(s, ctl, 0.0, params);
    // v_h + w x (x_o - x_h): (0.3,0,0) + (0,0,1) x (0.2,0,0) = (0.3, 0.2, 0)
    CHECK(d.obj_pos.x == doctest::Approx(0.3));
    CHECK(d.obj_pos.y == doctest::Approx(0.2));
    CHECK(d.obj_pos.z == doctest::Approx(0.0));
  }

  SUBCASE("grasped relative velocity decays") {
    SceneState s;
    s.hand_pos = {0.0, 0.0, 0.5};
    s.obj_pos = {0.1, 0.0, 0.5};
    s.obj_lin_vel = {0.0, 0.4, 0.0};
    s.obj_ang_vel = {0.0, 0.0, 2.0};
    s.grasped = true;
    const ControlSpline ctl = constant_controls(1.0, {0, 0, 0}, {0, 0, 0}, 0.0);
    const SceneDerivT<double> d = scene_rhs(s, ctl, 0.0, params);
    CHECK(d.obj_lin_vel.y == doctest::Approx(-params.k_jv * 0.4));
    CHECK(d.obj_ang_vel.z == doctest::Approx(-params.k_jw * 2.0));
    // residual velocity still moves the object on top of the hand motion
    CHECK(d.obj_pos.y == doctest::Approx(0.4));
  }

  SUBCASE("hand follows the controls kinematically") {
    SceneState s;
    s.hand_pos = {0.0, 0.3, 0.2};
    const Vec3 w{0.0, 1.0, 0.0};
    const ControlSpline ctl = constant_controls(1.0, {0.1, 0.2, 0.3}, w, -0.7);
    const SceneDerivT<double> d = scene_rhs(s, ctl, 0.0, params);
    CHECK(d.hand_pos.x == doctest::Approx(0.1));
    CHECK(d.hand_pos.z == doctest::Approx(0.3));
    CHECK(d.grasp_signal == doctest::Approx(-0.7));
    const Mat3 expect = hat(w) * s.hand_rot;
    CHECK(frobenius_norm(d.hand_rot - expect) < 1e-12);
  }
}

TEST_CASE("grasp guard value") {
  const HandGeometry hand;
  SceneState s;
  s.hand_pos = {0.0, 0.0, 0.1};
  s.obj_pos = {0.5, 0.0, 0.1};
  s.obj_size = {0.1, 0.1, 0.1};

  s.grasp_signal = 1.0;
  CHECK(event_value(s, hand) == doctest::Approx(0.25));  // tip at 0.2, face at 0.45

  // tip inside the object but the signal is off: guard stays positive
  s.hand_pos = {0.3, 0.0, 0.1};
  s.grasp_signal = -0.5;
  CHECK(event_value(s, hand) == doctest::Approx(0.5));

  // tip inside with a positive signal: guard goes negative
  s.grasp_signal = 0.5;
  CHECK(event_value(s, hand) < 0.0);
}

TEST_CASE("integration") {
  PhysicsParams params;
  const HandGeometry hand;

  SUBCASE("free fall matches the closed form") {
    const SceneState s0 = falling_object(0.5);
    const ControlSpline ctl = constant_controls(0.1, {0, 0, 0}, {0, 0, 0}, 0.0);
    const IntegrationResult r = integrate(s0, ctl, params, hand, 0.1, 2);
    REQUIRE(r.samples.size() == 2);
    CHECK(r.samples[1].obj_pos.z == doctest::Approx(0.5 - 0.5 * 9.81 * 0.01).epsilon(1e-9));
    CHECK(r.samples[1].obj_lin_vel.z == doctest::Approx(-0.981).epsilon(1e-9));
    CHECK(r.events.empty());
  }

  SUBCASE("dropped cube comes to rest on the ground") {
    const SceneState s0 = falling_object(0.035);  // 1 cm above resting height
    const ControlSpline ctl = constant_controls(2.0, {0, 0, 0}, {0, 0, 0}, 0.0);
    const IntegrationResult r = integrate(s0, ctl, params, hand, 2.0, 25);
    const SceneState& end = r.samples.back();
    CHECK(norm(end.obj_lin_vel) < 1e-3);
    CHECK(std::abs(end.obj_pos.z - 0.025) < 0.005);
    // equilibrium penetration: gravity balanced by the bottom-face springs
    CHECK(end.obj_pos.z < 0.025 + 1e-6);
  }

  SUBCASE("grasp fires when the tip reaches the object") {
    SceneState s0;
    s0.hand_pos = {0.0, 0.6, 0.05};
    s0.grasp_signal = 0.5;
    s0.obj_pos = {0.5, 0.6, 0.05};
    s0.obj_size = {0.1, 0.1, 0.1};
    const ControlSpline ctl = constant_controls(2.0, {0.25, 0, 0}, {0, 0, 0}, 0.0);
    const IntegrationResult r = integrate(s0, ctl, params, hand, 2.0, 41);
    REQUIRE(r.events.size() == 1);
    CHECK(r.events[0].kind == EventRecord::Kind::Grasp);
    // tip starts at x=0.2, face at x=0.45, closing speed 0.25
    CHECK(r.events[0].time == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(r.samples.back().grasped);
    // after the grasp the object matches the hand displacement
    const double carried = r.samples.back().obj_pos.x - 0.5;
    const double hand_moved_since = 0.25 * (2.0 - r.events[0].time);
    CHECK(carried == doctest::Approx(hand_moved_since).epsilon(0.05));
  }

  SUBCASE("release fires when the grasp signal turns negative") {
    SceneState s0;
    s0.hand_pos = {0.0, 0.6, 0.3};
    s0.grasp_signal = 0.3;
    s0.grasped = true;
    s0.obj_pos = {0.1, 0.6, 0.3};
    s0.obj_size = {0.05, 0.05, 0.05};
    const ControlSpline ctl = constant_controls(1.0, {0, 0, 0}, {0, 0, 0}, -1.0);
    const IntegrationResult r = integrate(s0, ctl, params, hand, 1.0, 21);
    REQUIRE(r.events.size() == 1);
    CHECK(r.events[0].kind == EventRecord::Kind::Release);
    CHECK(r.events[0].time == doctest::Approx(0.3).epsilon(1e-3));
    CHECK_FALSE(r.samples.back().grasped);
    // falls freely after release
    CHECK(r.samples.back().obj_pos.z < 0.3);
  }

  SUBCASE("an initial state inside the trigger grasps immediately") {
    SceneState s0;
    s0.hand_pos = {0.3, 0.6, 0.05};
    s0.grasp_signal = 0.5;
    s0.obj_pos = {0.5, 0.6, 0.05};
    s0.obj_size = {0.2, 0.2, 0.1};  // tip at x=0.5 is inside
    const ControlSpline ctl = constant_controls(0.5, {0, 0, 0}, {0, 0, 0}, 0.0);
    const IntegrationResult r = integrate(s0, ctl, params, hand, 0.5, 7);
    REQUIRE_FALSE(r.events.empty());
    CHECK(r.events[0].time == 0.0);
    CHECK(r.events[0].kind == EventRecord::Kind::Grasp);
  }

  SUBCASE("rotations stay on SO(3) through long spins") {
    SceneState s0 = falling_object(0.3);
    s0.obj_ang_vel = {3.0, -2.0, 1.0};
    const ControlSpline ctl = constant_controls(1.0, {0, 0, 0}, {1.0, 2.0, 0.5}, 0.0);
    const IntegrationResult r = integrate(s0, ctl, params, hand, 1.0, 101);
    for (const SceneState& s : r.samples) {
      CHECK(is_rotation(s.hand_rot, 1e-6));
      CHECK(is_rotation(s.obj_rot, 1e-6));
    }
  }

  SUBCASE("deterministic across repeated runs") {
    const SceneState s0 = falling_object(0.4);
    const ControlSpline ctl = constant_controls(0.5, {0.1, 0, 0}, {0, 0, 0.2}, 0.0);
    const IntegrationResult a = integrate(s0, ctl, params, hand, 0.5, 13);
    const IntegrationResult b = integrate(s0, ctl, params, hand, 0.5, 13);
    for (std::size_t k = 0; k < a.samples.size(); ++k) {
      CHECK(a.samples[k].obj_pos.z == b.samples[k].obj_pos.z);
      CHECK(a.samples[k].hand_pos.x == b.samples[k].hand_pos.x);
    }
  }

  SUBCASE("non-finite controls are reported") {
    SceneState s0 = falling_object(0.5);
    ControlSpline ctl = constant_controls(0.5, {0, 0, 0}, {0, 0, 0}, 0.0);
    ctl.points[0][0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(integrate(s0, ctl, params, hand, 0.5, 7), std::runtime_error);
  }

  SUBCASE("argument validation") {
    const SceneState s0 = falling_object(0.5);
    const ControlSpline ctl = constant_controls(0.5, {0, 0, 0}, {0, 0, 0}, 0.0);
    CHECK_THROWS_AS(integrate(s0, ctl, params, hand, 0.0, 5), std::invalid_argument);
    CHECK_THROWS_AS(integrate(s0, ctl, params, hand, 0.5, 1), std::invalid_argument);
    PhysicsParams bad;
    bad.k_p = 0.0;
    CHECK_THROWS_AS(integrate(s0, ctl, bad, hand, 0.5, 5), std::invalid_argument);
  }
}

TEST_CASE("taped integration matches plain values and differentiates") {
  PhysicsParams params;
  const HandGeometry hand;
  const double T = 0.2;

  ad::Tape tape;
  ad::TapeScope scope(&tape);

  SceneStateT<ad::DVar> s0;
  s0.hand_pos = {ad::DVar(0.0), ad::DVar(5.0), ad::DVar(2.0)};
  s0.grasp_signal = ad::DVar(-1.0);
  const ad::DVar z0 = tape.leaf(0.8);
  const ad::DVar vz0 = tape.leaf(0.0);
  s0.obj_pos = {ad::DVar(0.0), ad::DVar(0.6), z0};
  s0.obj_lin_vel = {ad::DVar(0.0), ad::DVar(0.0), vz0};
  s0.obj_size = {ad::DVar(0.05), ad::DVar(0.05), ad::DVar(0.05)};

  ControlSplineT<ad::DVar> ctl;
  ctl.duration = T;
  ctl.points.assign(2, {ad::DVar(0.0), ad::DVar(0.0), ad::DVar(0.0), ad::DVar(0.0),
                        ad::DVar(0.0), ad::DVar(0.0), ad::DVar(0.0)});

  const IntegrationResultT<ad::DVar> r = integrate(s0, ctl, params, hand, T, 3);
  const ad::DVar z_end = r.samples.back().obj_pos.z;
  CHECK(ad::value_of(z_end) == doctest::Approx(0.8 - 0.5 * 9.81 * T * T).epsilon(1e-9));

  tape.backward(z_end);
  // z(T) = z0 + v0*T - g*T^2/2, so dz/dz0 = 1 and dz/dv0 = T
  CHECK(tape.grad(z0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(tape.grad(vz0) == doctest::Approx(T).epsilon(1e-9));
}

TEST_CASE("physics parameter validation") {
  PhysicsParams p;
  p.mu = -0.1;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = PhysicsParams{};
  p.n_boundary_points = 4;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = PhysicsParams{};
  p.max_step = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  CHECK_NOTHROW(PhysicsParams{}.validate());
}
