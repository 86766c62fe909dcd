#pragma once

#include <vector>

#include "nelf/common.hpp"

namespace nelf {

// Pinhole camera. Right-handed, x right / y up, looking down -z in the
// camera frame; R maps camera-frame directions into the world frame.
struct CameraPose {
  Vec3 origin = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();  // world-from-camera
  double focal = 1.0;                // pixels
  double cx = 0.0, cy = 0.0;         // principal point, pixels
  int width = 1, height = 1;

  // Pseudo-data cameras carry literally interpolated rotations, so callers
  // pick the tolerance (strict 1e-6 for user input, relaxed for synthesis).
  void validate(double ortho_tol = 1e-6) const;

  // Same pose, intrinsics and resolution scaled by 1/factor.
  CameraPose scaled(int factor) const;
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();  // unit length
};

struct RayRepConfig {
  int k_samples = 8;       // points per ray, >= 2
  double near = 1.0;
  double far = 4.0;
  int pe_freqs = 4;        // positional-encoding octaves
  bool include_input = true;

  void validate() const;

  int raw_dim() const { return 3 * k_samples; }
  int encoded_scalar_dim() const { return 2 * pe_freqs + (include_input ? 1 : 0); }
  int encoded_dim(bool with_shoulder = false) const {
    return raw_dim() * (with_shoulder ? 2 : 1) * encoded_scalar_dim();
  }
};

// One ray per pixel, row-major (row v, column u). Pixel centers are at
// (u + 0.5, v + 0.5); directions are unit-normalized world vectors.
std::vector<Ray> generate_rays(const CameraPose& camera, double ortho_tol = 1e-6);

Ray pixel_ray(const CameraPose& camera, double u, double v);

// K evenly spaced sample points, endpoints inclusive (t_1 = near, t_K = far),
// flattened as (x_1, y_1, z_1, ..., x_K, y_K, z_K).
std::vector<double> point_concat(const Ray& ray, const RayRepConfig& cfg);

// Per scalar p: optionally p itself, then (sin(2^k p), cos(2^k p)) for
// k = 0..pe_freqs-1, scalars processed in input order.
std::vector<double> positional_encode(const std::vector<double>& v, int pe_freqs,
                                      bool include_input);

void positional_encode_into(const double* v, int n, int pe_freqs, bool include_input,
                            double* out);

// Gradient of positional_encode w.r.t. its input, given the gradient w.r.t.
// the encoded vector.
void positional_encode_backward(const double* v, int n, int pe_freqs, bool include_input,
                                const double* d_encoded, double* d_v);

// Base point_concat followed by the same sampled points re-expressed in the
// shoulder frame (shoulder_rotation^-1 applied to each point). Length 6K.
std::vector<double> shoulder_ray_rep(const Ray& ray, const Mat3& shoulder_rotation,
                                     const RayRepConfig& cfg, double ortho_tol = 1e-6);

bool is_rotation(const Mat3& m, double tol);

}  // namespace nelf
