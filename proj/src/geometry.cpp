#include "nelf/geometry.hpp"

#include <cmath>

namespace nelf {

EvalCounters& counters() {
  static EvalCounters c;
  return c;
}

bool is_rotation(const Mat3& m, double tol) {
  Mat3 err = m.transpose() * m - Mat3::Identity();
  return err.cwiseAbs().maxCoeff() <= tol && m.determinant() > 0.0;
}

void CameraPose::validate(double ortho_tol) const {
  check(width >= 1 && height >= 1, "camera: width/height must be >= 1");
  check(focal > 0.0, "camera: focal must be positive");
  check(is_rotation(rotation, ortho_tol), "camera: rotation is not orthonormal");
}

CameraPose CameraPose::scaled(int factor) const {
  check(factor >= 1, "camera: scale factor must be >= 1");
  check(width % factor == 0 && height % factor == 0,
        "camera: resolution not divisible by scale factor");
  CameraPose c = *this;
  c.focal = focal / factor;
  c.cx = cx / factor;
  c.cy = cy / factor;
  c.width = width / factor;
  c.height = height / factor;
  return c;
}

void RayRepConfig::validate() const {
  check(k_samples >= 2, "ray rep: K must be >= 2");
  check(near < far, "ray rep: near must be < far");
  check(pe_freqs >= 0, "ray rep: pe_freqs must be >= 0");
}

Ray pixel_ray(const CameraPose& camera, double u, double v) {
  Vec3 d_cam((u - camera.cx) / camera.focal, (camera.cy - v) / camera.focal, -1.0);
  Ray r;
  r.origin = camera.origin;
  r.direction = (camera.rotation * d_cam).normalized();
  return r;
}

std::vector<Ray> generate_rays(const CameraPose& camera, double ortho_tol) {
  camera.validate(ortho_tol);
  std::vector<Ray> rays;
  rays.reserve(static_cast<size_t>(camera.width) * camera.height);
  for (int v = 0; v < camera.height; ++v)
    for (int u = 0; u < camera.width; ++u)
      rays.push_back(pixel_ray(camera, u + 0.5, v + 0.5));
  return rays;
}

std::vector<double> point_concat(const Ray& ray, const RayRepConfig& cfg) {
  cfg.validate();
  std::vector<double> out(static_cast<size_t>(cfg.raw_dim()));
  const double step = (cfg.far - cfg.near) / (cfg.k_samples - 1);
  for (int i = 0; i < cfg.k_samples; ++i) {
    const double t = cfg.near + step * i;
    const Vec3 p = ray.origin + t * ray.direction;
    out[3 * i + 0] = p.x();
    out[3 * i + 1] = p.y();
    out[3 * i + 2] = p.z();
  }
  return out;
}

void positional_encode_into(const double* v, int n, int pe_freqs, bool include_input,
                            double* out) {
  int j = 0;
  for (int i = 0; i < n; ++i) {
    const double p = v[i];
    if (include_input) out[j++] = p;
    double freq = 1.0;
    for (int k = 0; k < pe_freqs; ++k) {
      out[j++] = std::sin(freq * p);
      out[j++] = std::cos(freq * p);
      freq *= 2.0;
    }
  }
}

std::vector<double> positional_encode(const std::vector<double>& v, int pe_freqs,
                                      bool include_input) {
  check(pe_freqs >= 0, "positional_encode: pe_freqs must be >= 0");
  std::vector<double> out(v.size() * (2 * pe_freqs + (include_input ? 1 : 0)));
  positional_encode_into(v.data(), static_cast<int>(v.size()), pe_freqs, include_input,
                         out.data());
  return out;
}

void positional_encode_backward(const double* v, int n, int pe_freqs, bool include_input,
                                const double* d_encoded, double* d_v) {
  int j = 0;
  for (int i = 0; i < n; ++i) {
    const double p = v[i];
    double g = 0.0;
    if (include_input) g += d_encoded[j++];
    double freq = 1.0;
    for (int k = 0; k < pe_freqs; ++k) {
      g += freq * std::cos(freq * p) * d_encoded[j++];
      g -= freq * std::sin(freq * p) * d_encoded[j++];
      freq *= 2.0;
    }
    d_v[i] = g;
  }
}

std::vector<double> shoulder_ray_rep(const Ray& ray, const Mat3& shoulder_rotation,
                                     const RayRepConfig& cfg, double ortho_tol) {
  check(is_rotation(shoulder_rotation, ortho_tol),
        "shoulder_ray_rep: shoulder rotation is not orthonormal");
  std::vector<double> base = point_concat(ray, cfg);
  std::vector<double> out(base.size() * 2);
  std::copy(base.begin(), base.end(), out.begin());
  const Mat3 inv = shoulder_rotation.inverse();
  for (int i = 0; i < cfg.k_samples; ++i) {
    const Vec3 p(base[3 * i], base[3 * i + 1], base[3 * i + 2]);
    const Vec3 q = inv * p;
    out[base.size() + 3 * i + 0] = q.x();
    out[base.size() + 3 * i + 1] = q.y();
    out[base.size() + 3 * i + 2] = q.z();
  }
  return out;
}

}  // namespace nelf
