// Timing comparison of the serial and OpenMP soft-rasterization kernels, plus
// a bitwise equality check over the timed runs. Workload: the hand capsule and
// a cuboid swept through representative poses at the default image size.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "trajrec/render.hpp"

using namespace trajrec;

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::vector<std::vector<PixelT<double>>>& scenes, const CameraParams& intr,
               double sigma, bool omp, std::vector<Mask>* out) {
  const auto t0 = Clock::now();
  for (const auto& pts : scenes)
    out->push_back(omp ? rasterize_soft_omp(pts, intr, sigma) : rasterize_soft_serial(pts, intr, sigma));
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  int repeats = argc > 1 ? std::atoi(argv[1]) : 200;
  if (repeats < 1) repeats = 1;

  const CameraParams intr;
  const CameraPose pose = camera_pose(intr);
  const double sigma = 1.5;

  std::vector<std::vector<PixelT<double>>> scenes;
  for (int i = 0; i < repeats; ++i) {
    const double t = static_cast<double>(i) / repeats;
    Cuboid box;
    box.pos = {0.12 * std::sin(6.28 * t), 0.55 + 0.25 * t, 0.03 + 0.08 * t};
    box.size = {0.05 + 0.03 * t, 0.06, 0.04};
    scenes.push_back(project_points(cuboid_silhouette_points(box), pose, intr));

    const Vec3 hand_pos{0.05 - 0.1 * t, 0.45 + 0.2 * t, 0.15};
    const Mat3 hand_rot = Mat3::identity();
    scenes.push_back(
        project_points(cylinder_silhouette_points(hand_pos, hand_rot, HandGeometry{}), pose, intr));
  }

  std::vector<Mask> serial_out, omp_out;
  serial_out.reserve(scenes.size());
  omp_out.reserve(scenes.size());
  // Warm-up pass so page faults and thread-pool spin-up stay out of the timings.
  { std::vector<Mask> warm; time_ms(scenes, intr, sigma, true, &warm); }

  const double t_serial = time_ms(scenes, intr, sigma, false, &serial_out);
  const double t_omp = time_ms(scenes, intr, sigma, true, &omp_out);

  bool identical = serial_out.size() == omp_out.size();
  for (std::size_t i = 0; identical && i < serial_out.size(); ++i)
    identical = serial_out[i].data.size() == omp_out[i].data.size() &&
                std::memcmp(serial_out[i].data.data(), omp_out[i].data.data(),
                            serial_out[i].data.size() * sizeof(double)) == 0;

  int threads = 1;
#ifdef _OPENMP
#pragma omp parallel
#pragma omp single
  threads = omp_get_num_threads();
#endif

  std::printf("masks rasterized     %zu (%dx%d px)\n", scenes.size(), intr.image_w, intr.image_h);
  std::printf("serial reference     %8.2f ms  (%.3f ms/mask)\n", t_serial, t_serial / scenes.size());
  std::printf("openmp (%2d threads)  %8.2f ms  (%.3f ms/mask)\n", threads, t_omp,
              t_omp / scenes.size());
  std::printf("speedup              %8.2fx\n", t_serial / t_omp);
  std::printf("outputs identical    %s\n", identical ? "yes" : "NO");
  return identical ? 0 : 1;
}
