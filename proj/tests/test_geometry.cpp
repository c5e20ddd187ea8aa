#include <random>

#include "doctest.h"
#include "trajrec/geometry.hpp"
#include "trajrec/rotation.hpp"

using namespace trajrec;

namespace {

Cuboid unit_box_at(const Vec3& pos) {
  Cuboid c;
  c.pos = pos;
  c.size = {1.0, 1.0, 1.0};
  return c;
}

}  // namespace

TEST_CASE("cuboid signed distance") {
  const Cuboid c = unit_box_at({0.0, 0.0, 0.0});

  SUBCASE("outside along a face") {
    CHECK(sdf_cuboid(Vec3{2.0, 0.0, 0.0}, c) == doctest::Approx(1.5));
    CHECK(sdf_cuboid(Vec3{0.0, -3.0, 0.0}, c) == doctest::Approx(2.5));
  }

  SUBCASE("outside along an edge and a corner") {
    // nearest edge point is (0.5, 0.5, 0), distance sqrt(0.5^2 + 0.5^2)
    CHECK(sdf_cuboid(Vec3{1.0, 1.0, 0.0}, c) == doctest::Approx(std::sqrt(0.5)));
    CHECK(sdf_cuboid(Vec3{1.0, 1.0, 1.0}, c) == doctest::Approx(std::sqrt(0.75)));
  }

  SUBCASE("inside is minus the distance to the nearest face") {
    CHECK(sdf_cuboid(Vec3{0.0, 0.0, 0.0}, c) == doctest::Approx(-0.5));
    CHECK(sdf_cuboid(Vec3{0.4, 0.0, 0.0}, c) == doctest::Approx(-0.1));
    CHECK(sdf_cuboid(Vec3{0.1, 0.45, -0.2}, c) == doctest::Approx(-0.05));
  }

  SUBCASE("zero on the boundary") {
    CHECK(sdf_cuboid(Vec3{0.5, 0.0, 0.0}, c) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sdf_cuboid(Vec3{0.5, 0.5, 0.5}, c) == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("respects pose and anisotropic size") {
    Cuboid box;
    box.pos = {1.0, 2.0, 3.0};
    box.rot = rotation_about_z(M_PI / 2.0);
    box.size = {2.0, 0.5, 1.0};
    // +x face of the local frame now points along +y in the world
    CHECK(sdf_cuboid(Vec3{1.0, 4.0, 3.0}, box) == doctest::Approx(1.0));
    CHECK(sdf_cuboid(box.pos, box) == doctest::Approx(-0.25));
  }

  SUBCASE("translation invariance") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 10; ++i) {
      const Vec3 shift{u(rng), u(rng), u(rng)};
      const Vec3 p{u(rng), u(rng), u(rng)};
      Cuboid moved = c;
      moved.pos += shift;
      CHECK(sdf_cuboid(p + shift, moved) == doctest::Approx(sdf_cuboid(p, c)));
    }
  }
}

TEST_CASE("ground halfspace distance is the height") {
  CHECK(sdf_halfspace_ground(Vec3{4.0, -2.0, 0.3}) == 0.3);
  CHECK(sdf_halfspace_ground(Vec3{0.0, 0.0, -0.1}) == -0.1);
}

TEST_CASE("hand tip and tip-object distance") {
  HandGeometry geom;  // length 0.40, radius 0.04
  SceneState s;
  s.hand_pos = {0.0, 0.0, 0.5};
  s.hand_rot = Mat3::identity();
  s.obj_pos = {1.0, 0.0, 0.5};
  s.obj_rot = Mat3::identity();
  s.obj_size = {0.1, 0.1, 0.1};

  const Vec3 tip = hand_tip(s, geom);
  CHECK(tip.x == doctest::Approx(0.2));
  CHECK(tip.y == doctest::Approx(0.0));
  CHECK(tip.z == doctest::Approx(0.5));

  // tip at x=0.2, object face at x=0.95
  CHECK(hand_tip_object_distance(s, geom) == doctest::Approx(0.75));

  // rotating the hand 180 degrees about z points the tip the other way
  s.hand_rot = rotation_about_z(M_PI);
  const Vec3 tip2 = hand_tip(s, geom);
  CHECK(tip2.x == doctest::Approx(-0.2));
}

TEST_CASE("contact normals") {
  const Cuboid c = unit_box_at({0.0, 0.0, 0.0});

  SUBCASE("outside a face points along that face") {
    const Vec3 n = contact_normal_cuboid(Vec3{3.0, 0.0, 0.0}, c);
    CHECK(n.x == doctest::Approx(1.0));
    CHECK(n.y == doctest::Approx(0.0));
    CHECK(n.z == doctest::Approx(0.0));
    const Vec3 nd = contact_normal_cuboid(Vec3{0.0, 0.0, -2.0}, c);
    CHECK(nd.z == doctest::Approx(-1.0));
  }

  SUBCASE("outside a corner points along the diagonal") {
    const Vec3 n = contact_normal_cuboid(Vec3{1.0, 1.0, 1.0}, c);
    const double inv = 1.0 / std::sqrt(3.0);
    CHECK(n.x == doctest::Approx(inv));
    CHECK(n.y == doctest::Approx(inv));
    CHECK(n.z == doctest::Approx(inv));
  }

  SUBCASE("inside picks the nearest face") {
    const Vec3 n = contact_normal_cuboid(Vec3{0.0, 0.0, 0.45}, c);
    CHECK(n.x == doctest::Approx(0.0));
    CHECK(n.y == doctest::Approx(0.0));
    CHECK(n.z == doctest::Approx(1.0));
    const Vec3 n2 = contact_normal_cuboid(Vec3{-0.4, 0.1, 0.0}, c);
    CHECK(n2.x == doctest::Approx(-1.0));
  }

  SUBCASE("unit length everywhere") {
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int i = 0; i < 50; ++i) {
      const Vec3 p{u(rng), u(rng), u(rng)};
      if (std::abs(value_of(squared_norm(p))) < 1e-12) continue;
      CHECK(norm(contact_normal_cuboid(p, c)) == doctest::Approx(1.0));
    }
  }

  SUBCASE("degenerate center falls back to +z") {
    const Vec3 n = contact_normal_cuboid(Vec3{0.0, 0.0, 0.0}, c);
    CHECK(n.z == doctest::Approx(1.0));
  }

  SUBCASE("rotates with the cuboid") {
    Cuboid r = c;
    r.rot = rotation_about_z(M_PI / 2.0);
    // local +x face now faces world +y
    const Vec3 n = contact_normal_cuboid(Vec3{0.0, 3.0, 0.0}, r);
    CHECK(n.y == doctest::Approx(1.0));
  }
}

TEST_CASE("boundary sampling scheme") {
  SUBCASE("ordering: corners, edge midpoints, face centers, quarter points") {
    const std::vector<Vec3> pts = boundary_offsets(50);
    CHECK(pts.size() == 50);
    for (int i = 0; i < 8; ++i) {
      CHECK(std::abs(pts[i].x) == doctest::Approx(0.5));
      CHECK(std::abs(pts[i].y) == doctest::Approx(0.5));
      CHECK(std::abs(pts[i].z) == doctest::Approx(0.5));
    }
    for (int i = 8; i < 20; ++i) {
      int zeros = 0, halves = 0;
      for (int k = 0; k < 3; ++k) {
        if (pts[i][k] == 0.0) ++zeros;
        if (std::abs(pts[i][k]) == 0.5) ++halves;
      }
      CHECK(zeros == 1);  // edge midpoint: one coordinate at the middle
      CHECK(halves == 2);
    }
    for (int i = 20; i < 26; ++i) {
      int zeros = 0;
      for (int k = 0; k < 3; ++k)
        if (pts[i][k] == 0.0) ++zeros;
      CHECK(zeros == 2);  // face center: two middle coordinates
    }
    for (int i = 26; i < 50; ++i) {
      int quarters = 0;
      for (int k = 0; k < 3; ++k)
        if (std::abs(std::abs(pts[i][k]) - 0.25) < 1e-12) ++quarters;
      CHECK(quarters == 1);  // edge quarter point
    }
  }

  SUBCASE("all points lie on the unit cube surface") {
    for (const Vec3& p : boundary_offsets(50)) {
      const double m = std::max({std::abs(p.x), std::abs(p.y), std::abs(p.z)});
      CHECK(m == doctest::Approx(0.5));
    }
  }

  SUBCASE("default count covers corners, midpoints and face centers") {
    CHECK(boundary_offsets(26).size() == 26);
  }

  SUBCASE("count limits") {
    CHECK_THROWS_AS(boundary_offsets(7), std::invalid_argument);
    CHECK_THROWS_AS(boundary_offsets(1000), std::invalid_argument);
  }
}

TEST_CASE("world boundary points carry rigid-body velocity") {
  Cuboid c;
  c.pos = {1.0, 0.0, 0.0};
  c.size = {0.2, 0.2, 0.2};
  const Vec3 unit{0.5, 0.0, 0.0};  // +x face center fraction
  const Vec3 v{0.0, 1.0, 0.0};
  const Vec3 w{0.0, 0.0, 1.0};
  const BoundaryPoint bp = boundary_point_world(c, unit, v, w);
  CHECK(bp.position.x == doctest::Approx(1.1));
  CHECK(bp.offset.x == doctest::Approx(0.1));
  // v + w x r = (0,1,0) + (0,0,1) x (0.1,0,0) = (0, 1.1, 0)
  CHECK(bp.velocity.y == doctest::Approx(1.1));
  CHECK(bp.velocity.x == doctest::Approx(0.0));

  // rotation carries the offset with it
  c.rot = rotation_about_z(M_PI / 2.0);
  const BoundaryPoint bp2 = boundary_point_world(c, unit, v, w);
  CHECK(bp2.offset.y == doctest::Approx(0.1));
  CHECK(bp2.position.y == doctest::Approx(0.1));
}

TEST_CASE("scene cuboids from state") {
  SceneState s;
  s.obj_pos = {0.1, 0.2, 0.3};
  s.obj_rot = rotation_about_z(0.4);
  s.obj_size = {0.04, 0.05, 0.06};
  s.static_pos = {1.0, 1.0, 0.05};
  s.static_yaw = 0.7;
  s.static_size = {0.2, 0.2, 0.1};

  const Cuboid obj = object_cuboid(s);
  CHECK(obj.pos.x == 0.1);
  CHECK(obj.size.z == 0.06);
  CHECK(frobenius_norm(obj.rot - rotation_about_z(0.4)) < 1e-12);

  const Cuboid st = static_cuboid(s);
  CHECK(st.pos.z == 0.05);
  CHECK(frobenius_norm(st.rot - rotation_about_z(0.7)) < 1e-12);
}

TEST_CASE("ray-cuboid intersection") {
  const Cuboid c = unit_box_at({0.0, 0.0, 0.0});

  SUBCASE("axis-aligned hit from outside") {
    const auto t = ray_cuboid(Vec3{-3.0, 0.0, 0.0}, Vec3{1.0, 0.0, 0.0}, c);
    REQUIRE(t.has_value());
    CHECK(*t == doctest::Approx(2.5));
  }

  SUBCASE("miss") {
    CHECK_FALSE(ray_cuboid(Vec3{-3.0, 2.0, 0.0}, Vec3{1.0, 0.0, 0.0}, c).has_value());
    // pointing away
    CHECK_FALSE(ray_cuboid(Vec3{-3.0, 0.0, 0.0}, Vec3{-1.0, 0.0, 0.0}, c).has_value());
  }

  SUBCASE("origin inside hits at t = 0") {
    const auto t = ray_cuboid(Vec3{0.0, 0.1, -0.2}, Vec3{0.0, 0.0, 1.0}, c);
    REQUIRE(t.has_value());
    CHECK(*t == doctest::Approx(0.0));
  }

  SUBCASE("parallel ray outside the slab misses") {
    CHECK_FALSE(ray_cuboid(Vec3{0.0, 0.0, 2.0}, Vec3{1.0, 0.0, 0.0}, c).has_value());
  }

  SUBCASE("diagonal hit on a rotated box") {
    Cuboid r = c;
    r.rot = rotation_about_z(M_PI / 4.0);
    const auto t = ray_cuboid(Vec3{-3.0, 0.0, 0.0}, Vec3{1.0, 0.0, 0.0}, r);
    REQUIRE(t.has_value());
    // rotated unit cube extends to sqrt(2)/2 along x
    CHECK(*t == doctest::Approx(3.0 - std::sqrt(2.0) / 2.0));
  }
}

TEST_CASE("ray-cylinder intersection") {
  const Vec3 center{0.0, 0.0, 0.0};
  const Vec3 axis{0.0, 0.0, 1.0};
  const double half_len = 1.0, radius = 0.5;

  SUBCASE("perpendicular hit on the barrel") {
    const auto t = ray_cylinder(Vec3{-2.0, 0.0, 0.0}, Vec3{1.0, 0.0, 0.0}, center, axis,
                                half_len, radius);
    REQUIRE(t.has_value());
    CHECK(*t == doctest::Approx(1.5));
  }

  SUBCASE("axial hit on an end cap") {
    const auto t = ray_cylinder(Vec3{0.1, 0.0, 3.0}, Vec3{0.0, 0.0, -1.0}, center, axis,
                                half_len, radius);
    REQUIRE(t.has_value());
    CHECK(*t == doctest::Approx(2.0));
  }

  SUBCASE("barrel miss beyond the axial extent") {
    const auto t = ray_cylinder(Vec3{-2.0, 0.0, 1.5}, Vec3{1.0, 0.0, 0.0}, center, axis,
                                half_len, radius);
    CHECK_FALSE(t.has_value());
  }

  SUBCASE("radial miss") {
    CHECK_FALSE(ray_cylinder(Vec3{-2.0, 0.8, 0.0}, Vec3{1.0, 0.0, 0.0}, center, axis,
                             half_len, radius)
                    .has_value());
  }

  SUBCASE("origin inside counts as t = 0") {
    const auto t = ray_cylinder(Vec3{0.1, 0.1, 0.2}, Vec3{0.0, 1.0, 0.0}, center, axis,
                                half_len, radius);
    REQUIRE(t.has_value());
    CHECK(*t == doctest::Approx(0.0));
  }

  SUBCASE("tilted axis") {
    const Vec3 ax{1.0, 0.0, 0.0};
    const auto t = ray_cylinder(Vec3{0.0, 0.0, 2.0}, Vec3{0.0, 0.0, -1.0}, center, ax,
                                half_len, radius);
    REQUIRE(t.has_value());
    CHECK(*t == doctest::Approx(1.5));
  }
}
