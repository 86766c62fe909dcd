#pragma once

#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace nelf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Invalid user input or violated precondition (exit code 2 at the CLI).
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem / format failures (exit code 3 at the CLI).
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint/config mismatches (exit code 4 at the CLI).
class IncompatibleError : public std::runtime_error {
public:
  explicit IncompatibleError(const std::string& msg) : std::runtime_error(msg) {}
};

// Evaluation counters used by the single-pass and routing tests. Forward
// passes over a batch of B rays count as B evaluations.
struct EvalCounters {
  std::atomic<uint64_t> nelf_evals{0};
  std::atomic<uint64_t> warp_evals{0};
  std::atomic<uint64_t> bank_evals{0};
  std::atomic<uint64_t> sr_evals{0};

  void reset() {
    nelf_evals = 0;
    warp_evals = 0;
    bank_evals = 0;
    sr_evals = 0;
  }
};

EvalCounters& counters();

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace nelf
