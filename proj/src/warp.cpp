#include "nelf/warp.hpp"

#include <cmath>

namespace nelf {

namespace {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

}  // namespace

Mat3 rodrigues(const Vec3& omega) {
  const double theta2 = omega.squaredNorm();
  const Mat3 k = skew(omega);
  if (theta2 < 1e-16) {
    // Second-order Taylor; exact identity at omega = 0.
    return Mat3::Identity() + k + 0.5 * (k * k);
  }
  const double theta = std::sqrt(theta2);
  return Mat3::Identity() + (std::sin(theta) / theta) * k +
         ((1.0 - std::cos(theta)) / theta2) * (k * k);
}

std::array<Mat3, 3> rodrigues_jacobian(const Vec3& omega) {
  std::array<Mat3, 3> jac;
  const double theta2 = omega.squaredNorm();
  if (theta2 < 1e-18) {
    for (int i = 0; i < 3; ++i) jac[i] = skew(Vec3::Unit(i));
    return jac;
  }
  const Mat3 r = rodrigues(omega);
  const Mat3 eye_minus_r = Mat3::Identity() - r;
  for (int i = 0; i < 3; ++i) {
    const Vec3 e = Vec3::Unit(i);
    const Vec3 v = omega.cross(eye_minus_r * e);
    jac[i] = ((omega(i) * skew(omega) + skew(v)) / theta2) * r;
  }
  return jac;
}

void WarpNet::init(int latent_dim_, int width, int n_blocks, int pe_freqs_, Rng& rng) {
  latent_dim = latent_dim_;
  pe_freqs = pe_freqs_;
  net.init(point_input_dim() + latent_dim, width, n_blocks, 9, rng, /*zero_tail=*/true);
}

namespace {

// q' = R (q + c) - c + t
Vec3 apply_warp(const Vec3& q, const Vec3& omega, const Vec3& c, const Vec3& t,
                Mat3* rot_out) {
  const Mat3 r = rodrigues(omega);
  if (rot_out) *rot_out = r;
  return r * (q + c) - c + t;
}

}  // namespace

Vec3 WarpNet::warp_point(const Vec3& q, const Vector& latent) const {
  std::vector<Vec3> pts{q};
  warp_points(pts, latent);
  return pts[0];
}

void WarpNet::warp_points(std::vector<Vec3>& points, const Vector& latent) const {
  check(latent.size() == latent_dim, "warp: latent dimension mismatch");
  const int n = static_cast<int>(points.size());
  const int pdim = point_input_dim();
  Matrix in(n, net.in_dim());
  std::vector<double> enc(static_cast<size_t>(pdim));
  for (int i = 0; i < n; ++i) {
    positional_encode_into(points[i].data(), 3, pe_freqs, true, enc.data());
    in.row(i).head(pdim) = Eigen::Map<const Vector>(enc.data(), pdim).transpose();
    in.row(i).tail(latent_dim) = latent.transpose();
  }
  Matrix out = net.forward(in);
  for (int i = 0; i < n; ++i) {
    const Vec3 omega = out.row(i).segment<3>(0).transpose();
    const Vec3 c = out.row(i).segment<3>(3).transpose();
    const Vec3 t = out.row(i).segment<3>(6).transpose();
    points[i] = apply_warp(points[i], omega, c, t, nullptr);
  }
  counters().warp_evals.fetch_add(static_cast<uint64_t>(n), std::memory_order_relaxed);
}

void WarpNet::warp_points(std::vector<Vec3>& points, const Vector& latent,
                          WarpCache& cache) const {
  check(latent.size() == latent_dim, "warp: latent dimension mismatch");
  const int n = static_cast<int>(points.size());
  cache.q = points;
  const int pdim = point_input_dim();
  Matrix in(n, net.in_dim());
  std::vector<double> enc(static_cast<size_t>(pdim));
  for (int i = 0; i < n; ++i) {
    positional_encode_into(points[i].data(), 3, pe_freqs, true, enc.data());
    in.row(i).head(pdim) = Eigen::Map<const Vector>(enc.data(), pdim).transpose();
    in.row(i).tail(latent_dim) = latent.transpose();
  }
  Matrix out = net.forward(in, cache.mlp);
  cache.omega.resize(n);
  cache.c_rot.resize(n);
  cache.rot.resize(n);
  for (int i = 0; i < n; ++i) {
    cache.omega[i] = out.row(i).segment<3>(0).transpose();
    cache.c_rot[i] = out.row(i).segment<3>(3).transpose();
    const Vec3 t = out.row(i).segment<3>(6).transpose();
    points[i] = apply_warp(points[i], cache.omega[i], cache.c_rot[i], t, &cache.rot[i]);
  }
  counters().warp_evals.fetch_add(static_cast<uint64_t>(n), std::memory_order_relaxed);
}

void WarpNet::backward(const WarpCache& cache, const std::vector<Vec3>& d_points,
                       Vector& d_latent) {
  const int n = static_cast<int>(cache.q.size());
  Matrix d_out = Matrix::Zero(n, 9);
  for (int i = 0; i < n; ++i) {
    const Vec3& g = d_points[i];
    const Vec3 qc = cache.q[i] + cache.c_rot[i];
    const auto jac = rodrigues_jacobian(cache.omega[i]);
    for (int a = 0; a < 3; ++a) d_out(i, a) = g.dot(jac[a] * qc);
    d_out.row(i).segment<3>(3) = (cache.rot[i].transpose() * g - g).transpose();
    d_out.row(i).segment<3>(6) = g.transpose();
  }
  Matrix d_in = net.backward(cache.mlp, d_out);
  // Points are data, not parameters; only the latent gradient is kept.
  d_latent += d_in.rightCols(latent_dim).colwise().sum().transpose();
}

void WarpNet::zero_grad() { net.zero_grad(); }

void WarpNet::visit(const std::string& prefix, const ParamVisitor& fn) {
  net.visit(prefix, fn);
}

void WarpNet::visit_grads(const std::string& prefix, const ParamVisitor& fn) {
  net.visit_grads(prefix, fn);
}

std::vector<double> warp_ray_rep(const Ray& ray, const RayRepConfig& cfg,
                                 const Vector& latent, const WarpNet& net) {
  std::vector<double> base = point_concat(ray, cfg);
  std::vector<Vec3> pts(cfg.k_samples);
  for (int i = 0; i < cfg.k_samples; ++i)
    pts[i] = Vec3(base[3 * i], base[3 * i + 1], base[3 * i + 2]);
  net.warp_points(pts, latent);
  for (int i = 0; i < cfg.k_samples; ++i) {
    base[3 * i + 0] = pts[i].x();
    base[3 * i + 1] = pts[i].y();
    base[3 * i + 2] = pts[i].z();
  }
  return base;
}

}  // namespace nelf
