#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nelf/geometry.hpp"
#include "nelf/image.hpp"
#include "nelf/rng.hpp"
#include "nelf/teacher.hpp"

namespace nelf {

enum class FrameKind : uint8_t { Pseudo = 0, Real = 1 };

// One animation frame: driving code, camera, optional shoulder rotation and
// the target image. Real frames carry an index into the latent table.
struct ExpressionFrame {
  Vector e;
  CameraPose camera;
  std::optional<Mat3> shoulder_rotation;
  Image image;
  FrameKind kind = FrameKind::Pseudo;
  int frame_index = -1;  // real frames only
};

// Per-ray training tuple (r_o, r_d, e, c).
struct DatasetRecord {
  Vec3 r_o;
  Vec3 r_d;
  Vector e;
  Vec3 c;
  FrameKind kind = FrameKind::Pseudo;
  int frame_index = -1;
};

struct InterpolatedParams {
  Vector e;
  CameraPose camera;
  std::optional<Mat3> shoulder_rotation;
};

// Literal linear interpolation: alpha * f1 + (1 - alpha) * f2 for the code,
// origin and rotation matrices (rotations are generally not orthonormal
// afterwards). Optional re-orthonormalization projects onto the nearest
// rotation; off by default.
InterpolatedParams interpolate_frames(const ExpressionFrame& f1,
                                      const ExpressionFrame& f2, double alpha,
                                      bool reorthonormalize = false);

Mat3 nearest_rotation(const Mat3& m);

// `count` teacher-rendered frames at interpolated parameters of random real
// frame pairs; reproducible from the seed (one child stream per frame).
std::vector<ExpressionFrame> synthesize_pseudo_set(
    const SceneParams& scene, const std::vector<ExpressionFrame>& real_frames,
    int count, uint64_t seed, bool reorthonormalize = false);

struct NoiseParams {
  double sigma_e = 0.05;
  double sigma_rot_deg = 1.0;
  double sigma_trans = 0.01;
};

struct SimulatedRealSet {
  std::vector<ExpressionFrame> frames;  // perturbed metadata, true-pose images
  std::vector<Vector> true_codes;
  std::vector<CameraPose> true_cameras;
};

// Smooth expression/camera trajectories rendered with their TRUE parameters;
// the stored metadata is perturbed to emulate 3DMM fitting error.
SimulatedRealSet simulate_real_set(const SceneParams& scene, int count,
                                   const NoiseParams& noise, uint64_t seed, int width,
                                   int height);

// Orbit camera looking at the origin (y up).
CameraPose make_orbit_camera(double radius, double azimuth, double elevation, int width,
                             int height);

// LR pixel rays and box-downsampled targets for ray-based training.
std::vector<DatasetRecord> frame_to_records(const ExpressionFrame& frame, int lr_scale);

void write_dataset(const std::vector<ExpressionFrame>& frames, const std::string& path);
std::vector<ExpressionFrame> read_dataset(const std::string& path);

// Analytic size of the serialized dataset, for the format sanity check.
size_t dataset_file_size(const std::vector<ExpressionFrame>& frames);

}  // namespace nelf
