#pragma once

// On-disk formats: JSON run configuration, JSON trajectory export, P5 PGM
// masks, plain-text contact signals, and the Cartesian waypoint export.
// All writers are deterministic (fixed key order, shortest-round-trip float
// formatting) so identical inputs produce byte-identical files.

#include <string>
#include <vector>

#include "trajrec/losses.hpp"
#include "trajrec/render.hpp"
#include "trajrec/types.hpp"

namespace trajrec {

struct AdamParams {
  double alpha = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct Config {
  int max_iters = 400;           // phase-2 Adam iterations
  unsigned seed = 0;
  int n_spline = 0;              // 0: frames / 5, at least 4
  int phase1_anchor_iters = 300; // per-frame fit, first (anchor) frame
  int phase1_frame_iters = 100;  // per-frame fit, remaining frames
  double sigma = 1.5;            // soft-silhouette sharpness, px
  double fps = 12.0;
  AdamParams adam;
  LossWeights weights;
  PhysicsParams physics;
  CameraParams camera;           // intrinsics + initial height/elevation

  void validate() const;
};

Config load_config(const std::string& path);
void save_config(const Config& c, const std::string& path);

// Whole-file text write; throws on any stream failure.
void write_text_file(const std::string& path, const std::string& text);

// P5 binary graymap; masks store 0 or 255, soft values round to the nearest
// gray level.
void write_pgm(const Mask& m, const std::string& path);
Mask read_pgm(const std::string& path);

void write_contact(const ContactSignal& c, const std::string& path);
ContactSignal read_contact(const std::string& path);

// Trajectory exports carry the recovered camera and the per-iteration loss
// history; rotations are stored as wxyz quaternions.
struct LossHistoryEntry {
  int iteration = 0;
  LossTerms<double> terms;
};

struct TrajectoryExport {
  Trajectory trajectory;
  CameraParams camera;
  std::vector<LossHistoryEntry> history;
};

void save_trajectory(const TrajectoryExport& e, const std::string& path);
TrajectoryExport load_trajectory(const std::string& path);

// Plain-text gripper waypoints: one "t x y z qw qx qy qz" line per sample,
// with "GRASP t" / "RELEASE t" marker lines merged in time order.
void export_waypoints(const Trajectory& traj, const std::string& path);

}  // namespace trajrec
