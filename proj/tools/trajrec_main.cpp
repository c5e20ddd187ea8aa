// trajrec command-line tool: synthetic demo generation, trajectory recovery,
// success evaluation, batch benchmarking, waypoint export, frame rendering.
//
// Exit codes: 0 success, 2 usage/input error, 3 numerical failure.

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "trajrec/io.hpp"
#include "trajrec/metrics.hpp"
#include "trajrec/optimizer.hpp"
#include "trajrec/render.hpp"
#include "trajrec/synthetic.hpp"

namespace fs = std::filesystem;
using namespace trajrec;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

// Input/parse problems exit 2; anything thrown by the numerical pipeline
// (integration, optimization, rendering) exits 3.
template <typename Fn>
int run_input_stage(Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}

template <typename Fn>
int run_numerical_stage(Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

Config resolve_config(const std::string& flag_path) {
  std::string path = flag_path;
  if (path.empty()) {
    if (const char* env = std::getenv("TRAJREC_CONFIG")) path = env;
  }
  if (path.empty()) return Config{};
  return load_config(path);
}

void print_loss_breakdown(const std::vector<LossHistoryEntry>& history) {
  if (history.empty()) return;
  const LossTerms<double>& t = history.back().terms;
  std::printf("final: per=%.9g reg=%.9g con=%.9g total=%.9g\n", t.perceptual, t.regularization,
              t.contact, t.total());
}

// The optimizer sees only masks and the (filtered) contact signal; the demo's
// ground_truth.txt stays unread by design.
OptimizeResult optimize_demo(const LoadedDemo& demo, Config cfg, std::ostream* log) {
  cfg.camera.image_w = demo.camera.image_w;
  cfg.camera.image_h = demo.camera.image_h;
  cfg.camera.fov = demo.camera.fov;
  cfg.fps = demo.spec.fps;
  const ContactSignal tau = filter_contact(demo.contact, demo.masks);
  return optimize(demo.masks, tau, cfg, log);
}

struct BenchmarkJob {
  fs::path dir;
  DemoSpec spec;
};

int cmd_generate(const std::string& action_name, unsigned seed, const std::string& out_dir,
                 int frames, double noise) {
  DemoSpec spec;
  int rc = run_input_stage([&] {
    spec.action = parse_action(action_name);
    spec.seed = seed;
    if (frames > 0) spec.n_frames = frames;
    spec.validate();
    if (noise < 0.0 || noise > 0.3) throw std::invalid_argument("--noise must be in [0, 0.3]");
  });
  if (rc != kExitOk) return rc;

  Demo demo;
  rc = run_numerical_stage([&] { demo = generate(spec); });
  if (rc != kExitOk) return rc;

  return run_input_stage([&] {
    if (noise > 0.0) demo.contact = corrupt_contact(demo.contact, spec.seed, noise);
    save_demo(demo, out_dir);
    std::printf("wrote %s: %s seed %u, %d frames\n", out_dir.c_str(), to_string(spec.action),
                spec.seed, spec.n_frames);
  });
}

int cmd_optimize(const std::string& demo_dir, const std::string& config_path,
                 const std::string& out_file, bool verbose) {
  LoadedDemo demo;
  Config cfg;
  int rc = run_input_stage([&] {
    cfg = resolve_config(config_path);
    demo = load_demo(demo_dir);
  });
  if (rc != kExitOk) return rc;

  OptimizeResult res;
  rc = run_numerical_stage(
      [&] { res = optimize_demo(demo, cfg, verbose ? &std::cerr : nullptr); });
  if (rc != kExitOk) return rc;

  return run_input_stage([&] {
    TrajectoryExport ex;
    ex.trajectory = std::move(res.trajectory);
    ex.camera = res.camera;
    ex.history = std::move(res.history);
    save_trajectory(ex, out_file);
    print_loss_breakdown(ex.history);
    std::printf("wrote %s (%zu samples, %zu events)\n", out_file.c_str(),
                ex.trajectory.samples.size(), ex.trajectory.events.size());
  });
}

int cmd_evaluate(const std::string& traj_file, const std::string& action_name) {
  TrajectoryExport ex;
  ActionClass action{};
  int rc = run_input_stage([&] {
    action = parse_action(action_name);
    ex = load_trajectory(traj_file);
  });
  if (rc != kExitOk) return rc;

  return run_numerical_stage([&] {
    const Verdict v = evaluate(ex.trajectory, action);
    if (v.success) {
      std::printf("%s: success\n", to_string(action));
    } else {
      std::string why;
      for (const std::string& c : v.failed_criteria) {
        if (!why.empty()) why += "; ";
        why += c;
      }
      std::printf("%s: failure (%s)\n", to_string(action), why.c_str());
    }
  });
}

int cmd_benchmark(const std::string& root, const std::string& config_path, int jobs) {
  std::vector<BenchmarkJob> found;
  Config cfg;
  int rc = run_input_stage([&] {
    cfg = resolve_config(config_path);
    if (!fs::is_directory(root)) throw std::invalid_argument("not a directory: " + root);
    for (const fs::directory_entry& e : fs::directory_iterator(root)) {
      if (!e.is_directory() || !fs::exists(e.path() / "spec.txt")) continue;
      found.push_back({e.path(), load_demo(e.path().string()).spec});
    }
    if (found.empty()) throw std::invalid_argument("no demo directories under " + root);
  });
  if (rc != kExitOk) return rc;

  // Deterministic table order regardless of directory iteration order.
  std::sort(found.begin(), found.end(), [](const BenchmarkJob& a, const BenchmarkJob& b) {
    if (a.spec.action != b.spec.action) return a.spec.action < b.spec.action;
    if (a.spec.seed != b.spec.seed) return a.spec.seed < b.spec.seed;
    return a.dir < b.dir;
  });

  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(found.size())));

  struct Slot {
    std::optional<Trajectory> traj;
    std::string error;
  };
  std::vector<Slot> slots(found.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
#ifdef _OPENMP
    // Demo-level parallelism replaces pixel-level parallelism; nested teams
    // would oversubscribe the machine.
    if (jobs > 1) omp_set_num_threads(1);
#endif
    for (std::size_t i = next.fetch_add(1); i < found.size(); i = next.fetch_add(1)) {
      try {
        const LoadedDemo demo = load_demo(found[i].dir.string());
        slots[i].traj = optimize_demo(demo, cfg, nullptr).trajectory;
      } catch (const std::exception& e) {
        slots[i].error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  std::vector<std::pair<Trajectory, ActionClass>> results;
  BenchmarkCounts errored{};
  for (std::size_t i = 0; i < found.size(); ++i) {
    const ActionClass a = found[i].spec.action;
    if (slots[i].traj) {
      const Verdict v = evaluate(*slots[i].traj, a);
      std::string why;
      for (const std::string& c : v.failed_criteria) {
        if (!why.empty()) why += "; ";
        why += c;
      }
      std::printf("%-20s seed %-3u %s%s%s\n", to_string(a), found[i].spec.seed,
                  v.success ? "success" : "failure", why.empty() ? "" : ": ", why.c_str());
      results.emplace_back(std::move(*slots[i].traj), a);
    } else {
      std::printf("%-20s seed %-3u error: %s\n", to_string(a), found[i].spec.seed,
                  slots[i].error.c_str());
      ++errored.attempted[static_cast<int>(a)];
    }
  }

  BenchmarkCounts counts{};
  if (!results.empty()) counts = benchmark(results);
  for (int i = 0; i < kNumActions; ++i) counts.attempted[i] += errored.attempted[i];
  std::printf("\n%s", format_benchmark_table(counts).c_str());
  return kExitOk;
}

int cmd_export_waypoints(const std::string& traj_file, const std::string& out_file) {
  TrajectoryExport ex;
  int rc = run_input_stage([&] { ex = load_trajectory(traj_file); });
  if (rc != kExitOk) return rc;
  return run_input_stage([&] {
    export_waypoints(ex.trajectory, out_file);
    std::printf("wrote %s (%zu waypoints, %zu events)\n", out_file.c_str(),
                ex.trajectory.samples.size(), ex.trajectory.events.size());
  });
}

int cmd_render_frames(const std::string& traj_file, const std::string& out_dir) {
  TrajectoryExport ex;
  int rc = run_input_stage([&] {
    ex = load_trajectory(traj_file);
    fs::create_directories(out_dir);
  });
  if (rc != kExitOk) return rc;

  return run_numerical_stage([&] {
    for (std::size_t k = 0; k < ex.trajectory.samples.size(); ++k) {
      const Mask frame = render_composite(ex.trajectory.samples[k], ex.trajectory.hand, ex.camera);
      char name[32];
      std::snprintf(name, sizeof name, "frame_%04zu.pgm", k);
      write_pgm(frame, (fs::path(out_dir) / name).string());
    }
    std::printf("wrote %zu frames to %s\n", ex.trajectory.samples.size(), out_dir.c_str());
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hand-object trajectory recovery from silhouette videos"};
  app.require_subcommand(1);

  std::string action_name, out_path, demo_dir, config_path, traj_file, root;
  unsigned seed = 0;
  int frames = 0, jobs = 0;
  double noise = 0.0;
  bool verbose = false;

  CLI::App* gen = app.add_subcommand("generate", "write a synthetic demo directory");
  gen->add_option("--action", action_name, "action class, kebab-case (e.g. put-onto)")->required();
  gen->add_option("--seed", seed, "random seed")->default_val(0);
  gen->add_option("--out", out_path, "output directory")->required();
  gen->add_option("--frames", frames, "frame count (default 60)");
  gen->add_option("--noise", noise, "contact flip rate in [0, 0.3] applied to contact.txt");

  CLI::App* opt = app.add_subcommand("optimize", "recover a trajectory from a demo directory");
  opt->add_option("--demo", demo_dir, "demo directory")->required();
  opt->add_option("--config", config_path, "JSON config (default: $TRAJREC_CONFIG if set)");
  opt->add_option("--out", out_path, "output trajectory JSON")->required();
  opt->add_flag("--verbose", verbose, "stream per-iteration loss lines to stderr");

  CLI::App* ev = app.add_subcommand("evaluate", "score a recovered trajectory");
  ev->add_option("--traj", traj_file, "trajectory JSON")->required();
  ev->add_option("--action", action_name, "action class to score against")->required();

  CLI::App* bench = app.add_subcommand("benchmark", "optimize and score every demo under a root");
  bench->add_option("--root", root, "directory of demo directories")->required();
  bench->add_option("--config", config_path, "JSON config (default: $TRAJREC_CONFIG if set)");
  bench->add_option("--jobs", jobs, "worker count (default: hardware threads)");

  CLI::App* wp = app.add_subcommand("export-waypoints", "write gripper waypoints with events");
  wp->add_option("--traj", traj_file, "trajectory JSON")->required();
  wp->add_option("--out", out_path, "output text file")->required();

  CLI::App* rf = app.add_subcommand("render-frames", "rasterize composite frames");
  rf->add_option("--traj", traj_file, "trajectory JSON")->required();
  rf->add_option("--out", out_path, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  if (gen->parsed()) return cmd_generate(action_name, seed, out_path, frames, noise);
  if (opt->parsed()) return cmd_optimize(demo_dir, config_path, out_path, verbose);
  if (ev->parsed()) return cmd_evaluate(traj_file, action_name);
  if (bench->parsed()) return cmd_benchmark(root, config_path, jobs);
  if (wp->parsed()) return cmd_export_waypoints(traj_file, out_path);
  if (rf->parsed()) return cmd_render_frames(traj_file, out_path);
  return kExitInput;  // unreachable: require_subcommand
}
