#include <cmath>

#include "doctest.h"
#include "trajrec/losses.hpp"

using namespace trajrec;

namespace {

// Scene with the hand tip a known distance from the object face.
SceneState tip_at_distance(double d) {
  SceneState s;
  s.hand_pos = {0.0, 0.6, 0.2};  // tip at x = 0.2, near object face at 0.2 + d
  s.obj_pos = {0.25 + d, 0.6, 0.2};
  s.obj_size = {0.1, 0.1, 0.1};
  return s;
}

Mask blob_mask(const CameraParams& cam, int cx, int cy, int r) {
  Mask m(cam.image_w, cam.image_h);
  for (int y = cy - r; y <= cy + r; ++y)
    for (int x = cx - r; x <= cx + r; ++x) m.at(x, y) = 1.0;
  return m;
}

}  // namespace

TEST_CASE("contact loss") {
  const HandGeometry hand;
  LossWeights w;  // contact weight 10

  SUBCASE("contact frame penalizes separation and negative signal") {
    SceneState s = tip_at_distance(0.2);
    s.grasp_signal = -0.1;
    ContactSignal tau{{1}};
    const double loss = contact_loss(std::vector<SceneState>{s}, hand, tau, w);
    CHECK(loss == doctest::Approx(10.0 * (0.2 * 0.2 + 0.1 * 0.1)));
  }

  SUBCASE("touching with a positive signal satisfies a contact frame") {
    SceneState s = tip_at_distance(-0.01);
    s.grasp_signal = 0.5;
    ContactSignal tau{{1}};
    CHECK(contact_loss(std::vector<SceneState>{s}, hand, tau, w) == doctest::Approx(0.0));
  }

  SUBCASE("non-contact frame penalizes only a positive signal") {
    SceneState s = tip_at_distance(0.5);
    ContactSignal tau{{0}};
    s.grasp_signal = 0.3;
    CHECK(contact_loss(std::vector<SceneState>{s}, hand, tau, w) ==
          doctest::Approx(10.0 * 0.09));
    s.grasp_signal = -0.7;
    CHECK(contact_loss(std::vector<SceneState>{s}, hand, tau, w) == doctest::Approx(0.0));
  }

  SUBCASE("sums over frames and scales with the weight") {
    SceneState a = tip_at_distance(0.1);
    a.grasp_signal = 1.0;
    SceneState b = tip_at_distance(0.5);
    b.grasp_signal = 0.2;
    ContactSignal tau{{1, 0}};
    w.contact = 3.0;
    const double loss = contact_loss(std::vector<SceneState>{a, b}, hand, tau, w);
    CHECK(loss == doctest::Approx(3.0 * (0.1 * 0.1 + 0.2 * 0.2)));
  }

  SUBCASE("frame count mismatch is an error") {
    ContactSignal tau{{1, 0}};
    CHECK_THROWS_AS(contact_loss(std::vector<SceneState>{tip_at_distance(0.1)}, hand, tau, w),
                    std::invalid_argument);
  }
}

TEST_CASE("velocity regularization") {
  const CameraParams cam;
  LossWeights w;  // reg weights 1e-2

  ControlSpline spline;
  spline.duration = 1.0;
  spline.points.assign(2, {0.1, 0.2, 0.0, 0.0, 0.0, 0.5, 0.0});

  std::vector<SceneState> frames(2);
  frames[0].obj_lin_vel = {1.0, 0.0, 0.0};
  frames[1].obj_lin_vel = {2.0, 0.0, 0.0};
  const std::vector<double> times{0.0, 1.0};

  MaskSequence targets;
  targets.hand.assign(2, Mask(cam.image_w, cam.image_h));
  targets.object.assign(2, Mask(cam.image_w, cam.image_h));
  // frame 1 sees the object, so its residual velocity is not regularized
  targets.object[1] = blob_mask(cam, 64, 48, 3);

  SUBCASE("coupled form") {
    // hand: ||v + w||^2 = (0.1, 0.2, 0.5) squared = 0.30 per frame
    // object: frame 0 only, ||v||^2 = 1
    const double loss = regularization_loss(frames, spline, times, targets, w);
    CHECK(loss == doctest::Approx(2.0 * 0.01 * 0.30 + 0.01 * 1.0));
  }

  SUBCASE("decoupled form") {
    w.decoupled_velocity_reg = true;
    // hand: ||v||^2 + ||w||^2 = 0.05 + 0.25 per frame
    const double loss = regularization_loss(frames, spline, times, targets, w);
    CHECK(loss == doctest::Approx(2.0 * 0.01 * 0.30 + 0.01 * 1.0));
    frames[0].obj_ang_vel = {0.0, 1.0, 0.0};
    const double with_spin = regularization_loss(frames, spline, times, targets, w);
    CHECK(with_spin == doctest::Approx(loss + 0.01 * 1.0));
  }

  SUBCASE("coupled and decoupled differ when rates overlap") {
    ControlSpline mixed = spline;
    mixed.points.assign(2, {1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0});
    w.reg_obj = 0.0;
    const double coupled = regularization_loss(frames, mixed, times, targets, w);
    w.decoupled_velocity_reg = true;
    const double decoupled = regularization_loss(frames, mixed, times, targets, w);
    CHECK(coupled == doctest::Approx(2.0 * 0.01 * 4.0));    // ||(2,0,0)||^2
    CHECK(decoupled == doctest::Approx(2.0 * 0.01 * 2.0));  // 1 + 1
  }

  SUBCASE("frame count mismatch is an error") {
    CHECK_THROWS_AS(
        regularization_loss(frames, spline, std::vector<double>{0.0}, targets, w),
        std::invalid_argument);
  }
}

TEST_CASE("perceptual loss") {
  const CameraParams cam;
  const HandGeometry hand;
  const CameraPose pose = camera_pose(cam);
  LossWeights w;

  SceneState s;
  s.hand_pos = {-0.2, 0.55, 0.15};
  s.obj_pos = {0.05, 0.7, 0.03};
  s.obj_size = {0.06, 0.06, 0.06};

  const SceneMasks gt = render_hard_masks(s, hand, cam);
  MaskSequence targets;
  targets.hand = {gt.hand};
  targets.object = {gt.object};

  SUBCASE("matching state scores below a displaced one") {
    const double at_gt =
        perceptual_loss(std::vector<SceneState>{s}, targets, pose, cam, hand, w);
    SceneState shifted = s;
    shifted.obj_pos.x += 0.03;
    shifted.hand_pos.z += 0.03;
    const double off =
        perceptual_loss(std::vector<SceneState>{shifted}, targets, pose, cam, hand, w);
    CHECK(at_gt < off);
  }

  SUBCASE("weights gate entities out") {
    w.per_hand = 0.0;
    const double no_hand =
        perceptual_loss(std::vector<SceneState>{s}, targets, pose, cam, hand, w);
    SceneState hand_moved = s;
    hand_moved.hand_pos.x += 0.1;
    const double no_hand_moved =
        perceptual_loss(std::vector<SceneState>{hand_moved}, targets, pose, cam, hand, w);
    CHECK(no_hand == doctest::Approx(no_hand_moved));  // hand pose no longer matters
  }

  SUBCASE("empty target frames are skipped") {
    MaskSequence none;
    none.hand = {Mask(cam.image_w, cam.image_h)};
    none.object = {Mask(cam.image_w, cam.image_h)};
    CHECK(perceptual_loss(std::vector<SceneState>{s}, none, pose, cam, hand, w) == 0.0);
  }

  SUBCASE("an entity fully behind the camera scores exactly the weight") {
    SceneState behind = s;
    behind.hand_pos = {0.0, -1.0, 0.3};
    MaskSequence hand_only;
    hand_only.hand = {blob_mask(cam, 30, 40, 4)};
    hand_only.object = {Mask(cam.image_w, cam.image_h)};
    w.per_hand = 2.5;
    CHECK(perceptual_loss(std::vector<SceneState>{behind}, hand_only, pose, cam, hand, w) ==
          doctest::Approx(2.5));
  }

  SUBCASE("static object participates only when present") {
    SceneState with_static = s;
    with_static.has_static = true;
    with_static.static_pos = {-0.12, 0.8, 0.045};
    with_static.static_size = {0.09, 0.09, 0.09};
    const SceneMasks full = render_hard_masks(with_static, hand, cam);
    MaskSequence t3;
    t3.hand = {full.hand};
    t3.object = {full.object};
    t3.static_obj = {full.static_obj};

    const double all_on =
        perceptual_loss(std::vector<SceneState>{with_static}, t3, pose, cam, hand, w);
    w.per_static = 0.0;
    const double static_off =
        perceptual_loss(std::vector<SceneState>{with_static}, t3, pose, cam, hand, w);
    CHECK(all_on > static_off);
  }

  SUBCASE("frame count mismatch is an error") {
    CHECK_THROWS_AS(
        perceptual_loss(std::vector<SceneState>{s, s}, targets, pose, cam, hand, w),
        std::invalid_argument);
  }
}

TEST_CASE("total loss composes the three terms") {
  const CameraParams cam;
  const HandGeometry hand;
  const CameraPose pose = camera_pose(cam);
  const LossWeights w;

  SceneState s = tip_at_distance(0.1);
  s.grasp_signal = 0.4;
  s.obj_lin_vel = {0.2, 0.0, 0.0};
  const SceneMasks gt = render_hard_masks(s, hand, cam);
  MaskSequence targets;
  targets.hand = {gt.hand};
  targets.object = {gt.object};
  ContactSignal tau{{1}};
  ControlSpline spline;
  spline.duration = 1.0;
  spline.points.assign(2, {0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0});
  const std::vector<double> times{0.0};
  const std::vector<SceneState> frames{s};

  const LossTerms<double> t =
      total_loss(frames, spline, times, targets, tau, pose, cam, hand, w);
  CHECK(t.perceptual == perceptual_loss(frames, targets, pose, cam, hand, w));
  CHECK(t.regularization == regularization_loss(frames, spline, times, targets, w));
  CHECK(t.contact == contact_loss(frames, hand, tau, w));
  CHECK(t.total() == t.perceptual + t.regularization + t.contact);
  CHECK(t.contact == doctest::Approx(10.0 * 0.01));
}

TEST_CASE("loss log line format") {
  LossTerms<double> t;
  t.perceptual = 0.5;
  t.regularization = 0.25;
  t.contact = 0.125;
  CHECK(format_loss_line(3, t) == "iter=3 per=0.5 reg=0.25 con=0.125 total=0.875");
  t.perceptual = 1e-3;
  t.regularization = 0.0;
  t.contact = 0.0;
  CHECK(format_loss_line(0, t) == "iter=0 per=0.001 reg=0 con=0 total=0.001");
}

TEST_CASE("weight and sequence validation") {
  LossWeights w;
  w.contact = -1.0;
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);
  w = LossWeights{};
  w.per_hand = w.per_obj = w.per_static = 0.0;
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);
  CHECK_NOTHROW(LossWeights{}.validate());

  MaskSequence ms;
  ms.hand.assign(2, Mask(8, 8));
  ms.object.assign(1, Mask(8, 8));
  CHECK_THROWS_AS(ms.validate(), std::invalid_argument);
  ms.object.assign(2, Mask(8, 8));
  ms.static_obj.assign(1, Mask(8, 8));
  CHECK_THROWS_AS(ms.validate(), std::invalid_argument);
  ms.static_obj.clear();
  CHECK_NOTHROW(ms.validate());
}
