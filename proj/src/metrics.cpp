#include "trajrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "trajrec/geometry.hpp"

namespace trajrec {

namespace {

const std::array<const char*, kNumActions> kActionNames = {
    "pull-left-to-right", "pull-right-to-left", "push-left-to-right",
    "push-right-to-left", "pick-up",            "put-behind",
    "put-in-front-of",    "put-next-to",        "put-onto",
};

const std::array<const char*, kNumActions> kActionTitles = {
    "Pull left to right", "Pull right to left", "Push left to right",
    "Push right to left", "Pick up",            "Put behind",
    "Put in front of",    "Put next to",        "Put onto",
};

}  // namespace

const char* to_string(ActionClass a) { return kActionNames[static_cast<int>(a)]; }

ActionClass parse_action(const std::string& name) {
  for (int i = 0; i < kNumActions; ++i)
    if (name == kActionNames[i]) return static_cast<ActionClass>(i);
  throw std::invalid_argument("unknown action: " + name);
}

const std::array<ActionClass, kNumActions>& all_actions() {
  static const std::array<ActionClass, kNumActions> out = [] {
    std::array<ActionClass, kNumActions> a{};
    for (int i = 0; i < kNumActions; ++i) a[i] = static_cast<ActionClass>(i);
    return a;
  }();
  return out;
}

double object_bottom_z(const SceneState& s) {
  const Mat3& r = s.obj_rot;
  const double reach = 0.5 * (std::abs(r(2, 0)) * s.obj_size.x + std::abs(r(2, 1)) * s.obj_size.y +
                              std::abs(r(2, 2)) * s.obj_size.z);
  return s.obj_pos.z - reach;
}

double object_top_z(const SceneState& s) {
  const Mat3& r = s.obj_rot;
  const double reach = 0.5 * (std::abs(r(2, 0)) * s.obj_size.x + std::abs(r(2, 1)) * s.obj_size.y +
                              std::abs(r(2, 2)) * s.obj_size.z);
  return s.obj_pos.z + reach;
}

namespace {

// Pull/push travel is always along the camera x axis; +1 means towards +x.
double motion_sign(ActionClass a) {
  switch (a) {
    case ActionClass::PullLeftToRight:
    case ActionClass::PushLeftToRight:
      return +1.0;
    default:
      return -1.0;
  }
}

bool is_pull(ActionClass a) {
  return a == ActionClass::PullLeftToRight || a == ActionClass::PullRightToLeft;
}

bool is_pull_or_push(ActionClass a) {
  switch (a) {
    case ActionClass::PullLeftToRight:
    case ActionClass::PullRightToLeft:
    case ActionClass::PushLeftToRight:
    case ActionClass::PushRightToLeft:
      return true;
    default:
      return false;
  }
}

}  // namespace

bool action_needs_static(ActionClass a) {
  switch (a) {
    case ActionClass::PutBehind:
    case ActionClass::PutInFrontOf:
    case ActionClass::PutNextTo:
    case ActionClass::PutOnto:
      return true;
    default:
      return false;
  }
}

Verdict evaluate(const Trajectory& traj, ActionClass action, const MetricThresholds& th) {
  if (traj.empty()) throw std::invalid_argument("evaluate: empty trajectory");
  if (action_needs_static(action) && !traj.samples.front().has_static)
    throw std::invalid_argument("evaluate: action requires a static object");

  Verdict v;
  auto fail = [&](const std::string& name) {
    v.success = false;
    v.failed_criteria.push_back(name);
  };

  // Below-ground check over the whole trajectory, all actions.
  double min_bottom = std::numeric_limits<double>::infinity();
  double max_bottom = -std::numeric_limits<double>::infinity();
  for (const SceneState& s : traj.samples) {
    const double b = object_bottom_z(s);
    min_bottom = std::min(min_bottom, b);
    max_bottom = std::max(max_bottom, b);
  }
  if (min_bottom < -th.below_ground_tol) fail("below ground");

  const SceneState& first = traj.samples.front();
  const SceneState& last = traj.samples.back();

  if (is_pull_or_push(action)) {
    const double dir = motion_sign(action);
    const double disp = (last.obj_pos.x - first.obj_pos.x) * dir;
    if (disp < th.min_displacement) fail("min displacement");
    if (max_bottom >= first.obj_size.z) fail("lift below object height");

    // Tip side along the motion axis: ahead of the center when pulling,
    // behind it when pushing, on most grasped samples.
    int grasped = 0, correct = 0;
    for (const SceneState& s : traj.samples) {
      if (!s.grasped) continue;
      ++grasped;
      const double rel = (hand_tip(s, traj.hand).x - s.obj_pos.x) * dir;
      const bool ahead = rel > 0.0;
      if (ahead == is_pull(action)) ++correct;
    }
    if (grasped == 0 || correct < th.tip_side_fraction * grasped) fail("hand side");
  }

  if (action == ActionClass::PickUp) {
    if (max_bottom < th.min_lift) fail("min lift");
    bool on_table_before = true;
    for (const SceneState& s : traj.samples) {
      if (s.grasped) break;
      if (std::abs(object_bottom_z(s)) > th.on_table_tol) on_table_before = false;
    }
    if (!on_table_before) fail("on table before action");
  }

  if (action_needs_static(action)) {
    const double syaw = last.static_yaw;
    const Vec3 rel = last.obj_pos - last.static_pos;
    const double static_top = last.static_pos.z + 0.5 * last.static_size.z;

    if (action == ActionClass::PutOnto) {
      // Footprint containment in the static object's yawed frame.
      const double c = std::cos(syaw), s = std::sin(syaw);
      const double lx = c * rel.x + s * rel.y;
      const double ly = -s * rel.x + c * rel.y;
      if (std::abs(lx) > 0.5 * last.static_size.x || std::abs(ly) > 0.5 * last.static_size.y)
        fail("inside static footprint");
      if (std::abs(object_bottom_z(last) - static_top) > th.onto_top_tol)
        fail("bottom near static top");
    } else {
      bool side_ok = false;
      switch (action) {
        case ActionClass::PutBehind:
          side_ok = rel.y >= th.side_margin;
          break;
        case ActionClass::PutInFrontOf:
          side_ok = -rel.y >= th.side_margin;
          break;
        case ActionClass::PutNextTo:
          side_ok = std::abs(rel.x) >= th.side_margin && std::abs(rel.x) > std::abs(rel.y);
          break;
        default:
          break;
      }
      if (!side_ok) fail("correct side of static");
      if (object_top_z(last) > static_top) fail("top below static height");
    }
  }

  return v;
}

int BenchmarkCounts::total_success() const {
  int n = 0;
  for (int s : success) n += s;
  return n;
}

int BenchmarkCounts::total_attempted() const {
  int n = 0;
  for (int s : attempted) n += s;
  return n;
}

int BenchmarkCounts::success_rate_percent() const {
  const int t = total_attempted();
  return t == 0 ? 0 : 100 * total_success() / t;
}

BenchmarkCounts benchmark(const std::vector<std::pair<Trajectory, ActionClass>>& results) {
  if (results.empty()) throw std::invalid_argument("benchmark: no results");
  BenchmarkCounts out;
  for (const auto& [traj, action] : results) {
    const int i = static_cast<int>(action);
    ++out.attempted[i];
    out.success[i] += evaluate(traj, action).success;
  }
  return out;
}

std::string format_benchmark_table(const BenchmarkCounts& counts) {
  std::ostringstream os;
  std::size_t label_w = 12;
  for (const char* t : kActionTitles) label_w = std::max(label_w, std::string(t).size());
  for (int i = 0; i < kNumActions; ++i) {
    os << kActionTitles[i] << std::string(label_w + 2 - std::string(kActionTitles[i]).size(), ' ')
       << counts.success[i] << "/" << counts.attempted[i] << "\n";
  }
  os << "Total" << std::string(label_w - 3, ' ') << counts.total_success() << "/"
     << counts.total_attempted() << "\n";
  os << "Success rate" << std::string(label_w - 10, ' ') << counts.success_rate_percent() << "%\n";
  return os.str();
}

}  // namespace trajrec
