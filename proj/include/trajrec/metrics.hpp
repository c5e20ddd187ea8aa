#pragma once

// Trajectory success scoring for the nine manipulation actions, plus the
// benchmark aggregation table. Left/right are the camera's -x/+x; "behind"
// is +y (away from the camera), "in front of" -y.

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "trajrec/types.hpp"

namespace trajrec {

enum class ActionClass {
  PullLeftToRight,
  PullRightToLeft,
  PushLeftToRight,
  PushRightToLeft,
  PickUp,
  PutBehind,
  PutInFrontOf,
  PutNextTo,
  PutOnto,
};

inline constexpr int kNumActions = 9;

const char* to_string(ActionClass a);
ActionClass parse_action(const std::string& name);  // kebab-case, e.g. "put-onto"
const std::array<ActionClass, kNumActions>& all_actions();

// Put-* actions are judged relative to a static object; the rest need none.
bool action_needs_static(ActionClass a);

struct Verdict {
  bool success = true;
  std::vector<std::string> failed_criteria;
};

struct MetricThresholds {
  double min_displacement = 0.05;  // pull/push travel along the required axis
  double min_lift = 0.01;          // pick-up bottom height
  double below_ground_tol = 0.005; // allowed penetration at any sample
  double on_table_tol = 0.005;     // "on the table" bottom tolerance
  double side_margin = 0.02;       // put-behind/in-front/next-to separation
  double onto_top_tol = 0.03;      // put-onto bottom-to-top distance
  double tip_side_fraction = 0.75; // grasped samples with the tip on the correct side
};

Verdict evaluate(const Trajectory& traj, ActionClass action, const MetricThresholds& th = {});

struct BenchmarkCounts {
  std::array<int, kNumActions> success{};
  std::array<int, kNumActions> attempted{};

  int total_success() const;
  int total_attempted() const;
  // Floor of the percentage, matching the reporting convention used by the
  // reference table (49/54 prints as 90%).
  int success_rate_percent() const;
};

BenchmarkCounts benchmark(const std::vector<std::pair<Trajectory, ActionClass>>& results);

std::string format_benchmark_table(const BenchmarkCounts& counts);

// Object bottom/top along the gravity axis (support of the rotated cuboid).
double object_bottom_z(const SceneState& s);
double object_top_z(const SceneState& s);

}  // namespace trajrec
