#pragma once

#include <optional>

#include "nelf/geometry.hpp"
#include "nelf/image.hpp"

namespace nelf {

// Analytic stand-in for a pretrained avatar renderer: a star-shaped head
// surface r(theta, phi) = base + 0.1 * sum_k e_k b_k(theta, phi) deformed by
// the expression code, plus an optional rigidly rotated shoulder ellipsoid.
// Background is black; rendering is a pure function of its inputs.
struct SceneParams {
  int d_e = 4;
  double base_radius = 0.5;
  bool shoulder = false;
  double near = 1.0;
  double far = 4.0;
  int march_steps = 96;
  int bisect_iters = 60;
};

// Angular basis, bounded so the radius stays within +/-0.3 of the base for
// codes with max-norm <= 1. Even k terms are even in phi (mirror symmetric
// about the x-z plane), odd k terms are odd.
double deformation_basis(int k, int d_e, double theta, double phi);

// Radius of the head surface in direction (theta, phi).
double surface_radius(const SceneParams& scene, const Vector& e, double theta,
                      double phi);

// Signed field of the combined scene: positive outside, negative inside.
double scene_field(const SceneParams& scene, const Vector& e, const Vec3& p,
                   const std::optional<Mat3>& shoulder_rotation);

// Exact intersection along the ray via bracketed bisection on [near, far].
// Returns the hit parameter t, or nullopt on a miss.
std::optional<double> intersect_scene(const SceneParams& scene, const Vector& e,
                                      const Ray& ray,
                                      const std::optional<Mat3>& shoulder_rotation);

Vec3 shade_point(const SceneParams& scene, const Vector& e, const Vec3& p,
                 const std::optional<Mat3>& shoulder_rotation);

Image teacher_render(const SceneParams& scene, const Vector& e,
                     const CameraPose& camera,
                     const std::optional<Mat3>& shoulder_rotation);

}  // namespace nelf
