#pragma once

#include "nelf/renderer.hpp"

namespace nelf {

struct BenchResult {
  double mean_fps = 0.0;
  double mean_ms = 0.0;
  double std_ms = 0.0;
  std::vector<double> frame_ms;
};

// Wall-clock over `iters` serial renders after `warmup` discarded renders.
BenchResult bench_fps(const ModelBundle& bundle, const Vector& e,
                      const std::optional<Mat3>& shoulder_rotation, int resolution,
                      int warmup, int iters);

}  // namespace nelf
