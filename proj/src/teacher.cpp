#include "nelf/teacher.hpp"

#include <algorithm>
#include <cmath>

namespace nelf {

namespace {

constexpr double kDeformAmp = 0.1;
const Vec3 kLightDir = Vec3(0.4, 0.0, 0.92).normalized();  // in the y=0 plane
constexpr double kAmbient = 0.25;

// Shoulder ellipsoid in its canonical (unrotated) frame.
const Vec3 kShoulderCenter(0.0, -0.85, 0.0);
const Vec3 kShoulderAxes(0.60, 0.28, 0.32);

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

double head_field(const SceneParams& scene, const Vector& e, const Vec3& p) {
  const double rho = p.norm();
  if (rho < 1e-12) return -scene.base_radius;
  const double theta = std::acos(std::min(1.0, std::max(-1.0, p.z() / rho)));
  const double phi = std::atan2(p.y(), p.x());
  return rho - surface_radius(scene, e, theta, phi);
}

double shoulder_field(const Vec3& p, const Mat3& shoulder_rotation) {
  const Vec3 q = shoulder_rotation.inverse() * p;
  const Vec3 d = (q - kShoulderCenter).cwiseQuotient(kShoulderAxes);
  return d.norm() - 1.0;
}

Vec3 numeric_normal(const SceneParams& scene, const Vector& e, const Vec3& p,
                    const std::optional<Mat3>& shoulder_rotation) {
  const double h = 1e-5;
  Vec3 g;
  for (int i = 0; i < 3; ++i) {
    Vec3 lo = p, hi = p;
    lo(i) -= h;
    hi(i) += h;
    g(i) = scene_field(scene, e, hi, shoulder_rotation) -
           scene_field(scene, e, lo, shoulder_rotation);
  }
  const double n = g.norm();
  return n > 0.0 ? Vec3(g / n) : Vec3(0, 0, 1);
}

Vec3 head_albedo(const SceneParams& scene, const Vector& e, const Vec3& p) {
  const double rho = std::max(p.norm(), 1e-12);
  const double theta = std::acos(std::min(1.0, std::max(-1.0, p.z() / rho)));
  const double phi = std::atan2(p.y(), p.x());
  const double u =
      (surface_radius(scene, e, theta, phi) - scene.base_radius) / (3.0 * kDeformAmp);
  auto band = [](double v) { return std::min(0.98, std::max(0.05, v)); };
  return Vec3(band(0.62 + 0.30 * std::sin(3.0 * theta) * std::cos(2.0 * phi) + 0.10 * u),
              band(0.48 + 0.22 * std::cos(2.0 * theta) + 0.18 * u),
              band(0.40 + 0.18 * std::cos(4.0 * theta) * std::cos(phi) - 0.12 * u));
}

Vec3 shoulder_albedo(const Vec3& p, const Mat3& shoulder_rotation) {
  const Vec3 q = shoulder_rotation.inverse() * p;
  auto band = [](double v) { return std::min(0.98, std::max(0.05, v)); };
  return Vec3(band(0.30 + 0.22 * std::sin(9.0 * q.y() + 2.0 * q.x())),
              band(0.42 + 0.16 * std::sin(5.0 * q.x())),
              band(0.58 - 0.10 * std::sin(7.0 * q.z())));
}

}  // namespace

double deformation_basis(int k, int d_e, double theta, double phi) {
  const int m = k / 2 + 1;
  const double angular = (k % 2 == 0) ? std::sin(m * theta) * std::cos(m * phi)
                                      : std::sin(m * theta) * std::sin(m * phi);
  return (3.0 / d_e) * angular;
}

double surface_radius(const SceneParams& scene, const Vector& e, double theta,
                      double phi) {
  double perturb = 0.0;
  for (int k = 0; k < scene.d_e; ++k)
    perturb += e(k) * deformation_basis(k, scene.d_e, theta, phi);
  return scene.base_radius + kDeformAmp * perturb;
}

double scene_field(const SceneParams& scene, const Vector& e, const Vec3& p,
                   const std::optional<Mat3>& shoulder_rotation) {
  double f = head_field(scene, e, p);
  if (scene.shoulder && shoulder_rotation)
    f = std::min(f, shoulder_field(p, *shoulder_rotation));
  return f;
}

std::optional<double> intersect_scene(const SceneParams& scene, const Vector& e,
                                      const Ray& ray,
                                      const std::optional<Mat3>& shoulder_rotation) {
  // Clip [near, far] against a bounding sphere to skip empty rays fast.
  const double bound = scene.shoulder ? 1.6 : scene.base_radius + 3.0 * kDeformAmp + 0.05;
  const double b = ray.origin.dot(ray.direction);
  const double c = ray.origin.squaredNorm() - bound * bound;
  const double disc = b * b - c;
  if (disc <= 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double t0 = std::max(scene.near, -b - sq);
  const double t1 = std::min(scene.far, -b + sq);
  if (t0 >= t1) return std::nullopt;

  auto field_at = [&](double t) {
    return scene_field(scene, e, Vec3(ray.origin + t * ray.direction),
                       shoulder_rotation);
  };

  const double dt = (t1 - t0) / scene.march_steps;
  double t_prev = t0;
  double f_prev = field_at(t_prev);
  if (f_prev <= 0.0) return t_prev;
  for (int i = 1; i <= scene.march_steps; ++i) {
    const double t = t0 + dt * i;
    const double f = field_at(t);
    if (f <= 0.0) {
      double lo = t_prev, hi = t;
      for (int j = 0; j < scene.bisect_iters; ++j) {
        const double mid = 0.5 * (lo + hi);
        if (field_at(mid) > 0.0)
          lo = mid;
        else
          hi = mid;
      }
      return 0.5 * (lo + hi);
    }
    t_prev = t;
  }
  return std::nullopt;
}

Vec3 shade_point(const SceneParams& scene, const Vector& e, const Vec3& p,
                 const std::optional<Mat3>& shoulder_rotation) {
  const Vec3 n = numeric_normal(scene, e, p, shoulder_rotation);
  const double diffuse = std::max(0.0, n.dot(kLightDir));
  const double lum = kAmbient + (1.0 - kAmbient) * diffuse;

  Vec3 albedo;
  if (scene.shoulder && shoulder_rotation &&
      shoulder_field(p, *shoulder_rotation) < head_field(scene, e, p))
    albedo = shoulder_albedo(p, *shoulder_rotation);
  else
    albedo = head_albedo(scene, e, p);

  return Vec3(clamp01(lum * albedo.x()), clamp01(lum * albedo.y()),
              clamp01(lum * albedo.z()));
}

Image teacher_render(const SceneParams& scene, const Vector& e,
                     const CameraPose& camera,
                     const std::optional<Mat3>& shoulder_rotation) {
  check(e.size() == scene.d_e, "teacher_render: expression dimension mismatch");
  Image img(camera.height, camera.width, 3);
  for (int v = 0; v < camera.height; ++v) {
    for (int u = 0; u < camera.width; ++u) {
      const Ray ray = pixel_ray(camera, u + 0.5, v + 0.5);
      const auto t = intersect_scene(scene, e, ray, shoulder_rotation);
      if (!t) continue;  // black background
      const Vec3 p = ray.origin + *t * ray.direction;
      const Vec3 rgb = shade_point(scene, e, p, shoulder_rotation);
      img.at(v, u, 0) = static_cast<float>(rgb.x());
      img.at(v, u, 1) = static_cast<float>(rgb.y());
      img.at(v, u, 2) = static_cast<float>(rgb.z());
    }
  }
  return img;
}

}  // namespace nelf
