#include "nelf/bench.hpp"

#include <chrono>
#include <cmath>

#include "nelf/dataset.hpp"

namespace nelf {

BenchResult bench_fps(const ModelBundle& bundle, const Vector& e,
                      const std::optional<Mat3>& shoulder_rotation, int resolution,
                      int warmup, int iters) {
  check(iters >= 1, "bench: iters must be >= 1");
  check(warmup >= 0, "bench: warmup must be >= 0");
  check(resolution % 4 == 0, "bench: resolution must be divisible by 4");
  const CameraPose camera = make_orbit_camera(2.5, 0.3, 0.1, resolution, resolution);

  for (int i = 0; i < warmup; ++i)
    (void)render(e, camera, shoulder_rotation, bundle);

  BenchResult r;
  r.frame_ms.reserve(static_cast<size_t>(iters));
  for (int i = 0; i < iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    (void)render(e, camera, shoulder_rotation, bundle);
    const auto t1 = std::chrono::steady_clock::now();
    r.frame_ms.push_back(
        std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  double sum = 0.0;
  for (double v : r.frame_ms) sum += v;
  r.mean_ms = sum / iters;
  double var = 0.0;
  for (double v : r.frame_ms) var += (v - r.mean_ms) * (v - r.mean_ms);
  r.std_ms = iters > 1 ? std::sqrt(var / (iters - 1)) : 0.0;
  r.mean_fps = 1000.0 / r.mean_ms;
  return r;
}

}  // namespace nelf
