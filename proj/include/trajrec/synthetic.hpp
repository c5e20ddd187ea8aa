#pragma once

// Scripted demonstrations: a seeded scene layout plus a phase-based hand
// motion script, run through the same simulator the optimizer differentiates,
// so every demo is physically admissible by construction. Masks are hard
// occlusion-aware renders of the integrated states, and each demo is checked
// against the action metrics before it is returned.

#include <string>

#include "trajrec/io.hpp"
#include "trajrec/losses.hpp"
#include "trajrec/metrics.hpp"
#include "trajrec/types.hpp"

namespace trajrec {

struct DemoSpec {
  ActionClass action = ActionClass::PickUp;
  unsigned seed = 0;
  int n_frames = 60;
  double fps = 12.0;

  double obj_edge_min = 0.04, obj_edge_max = 0.08;        // manipulated cuboid, m
  double static_edge_min = 0.06, static_edge_max = 0.12;  // static cuboid, m
  double cam_height_min = 0.30, cam_height_max = 0.45;    // m
  double cam_elev_min_deg = 10.0, cam_elev_max_deg = 25.0;

  void validate() const;
};

struct Demo {
  DemoSpec spec;
  CameraParams camera;      // sampled ground-truth height/elevation
  MaskSequence masks;       // static_obj stays empty for actions without one
  ContactSignal contact;    // from the true grasp interval
  Trajectory ground_truth;  // simulator output; withheld from the optimizer
};

// Deterministic in the spec: the same spec yields byte-identical masks.
Demo generate(const DemoSpec& spec);

// Flips each frame independently with probability flip_rate (at most 0.3).
ContactSignal corrupt_contact(const ContactSignal& tau, unsigned seed, double flip_rate);

// Denoising applied before optimization: median-of-five, then contact forced
// while the object-mask centroid is already moving at the video start (and
// symmetrically at the end), then median-of-five again over the last 15
// frames.
ContactSignal filter_contact(const ContactSignal& noisy, const MaskSequence& masks);

// Directory layout: masks/{hand,object,static}_%04d.pgm, contact.txt,
// spec.txt, ground_truth.txt. Static masks are written only when the demo has
// a static object; ground_truth.txt is for analysis, never for optimization.
void save_demo(const Demo& demo, const std::string& dir);

struct LoadedDemo {
  DemoSpec spec;
  CameraParams camera;  // intrinsics from spec.txt; height/elevation defaults
  MaskSequence masks;
  ContactSignal contact;
};

LoadedDemo load_demo(const std::string& dir);

TrajectoryExport load_demo_ground_truth(const std::string& dir);

}  // namespace trajrec
