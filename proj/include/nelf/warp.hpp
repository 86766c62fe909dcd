#pragma once

#include "nelf/geometry.hpp"
#include "nelf/net.hpp"

namespace nelf {

// Rotation from an axis-angle vector via the exponential map. Always returns
// a valid rotation; exactly the identity at omega = 0.
Mat3 rodrigues(const Vec3& omega);

// d(rotation)/d(omega_i), i = 0..2 (Gallego & Yezzi closed form).
std::array<Mat3, 3> rodrigues_jacobian(const Vec3& omega);

struct WarpCache {
  MlpCache mlp;
  std::vector<Vec3> q;      // unwarped points
  std::vector<Vec3> omega;  // network outputs per point
  std::vector<Vec3> c_rot;
  std::vector<Mat3> rot;
};

// Latent-conditioned near-rigid point warp: (omega, c_rot, t) = G(PE(q), v);
// q' = R (q + c_rot) - c_rot + t. The tail starts at zero so the warp is the
// identity at initialization.
struct WarpNet {
  int pe_freqs = 4;
  int latent_dim = 16;
  ResidualMlp net;  // [PE(q) | v] -> 9

  void init(int latent_dim_, int width, int n_blocks, int pe_freqs_, Rng& rng);

  int point_input_dim() const { return 3 * (2 * pe_freqs + 1); }

  Vec3 warp_point(const Vec3& q, const Vector& latent) const;

  // Batched warp of n points sharing one frame latent. Results overwrite
  // `points`; pass a cache to enable backward.
  void warp_points(std::vector<Vec3>& points, const Vector& latent) const;
  void warp_points(std::vector<Vec3>& points, const Vector& latent,
                   WarpCache& cache) const;

  // d_points: gradient w.r.t. warped points. Accumulates network grads and
  // adds the latent gradient into d_latent.
  void backward(const WarpCache& cache, const std::vector<Vec3>& d_points,
                Vector& d_latent);

  void zero_grad();
  void visit(const std::string& prefix, const ParamVisitor& fn);
  void visit_grads(const std::string& prefix, const ParamVisitor& fn);
};

// point_concat with every sampled point warped before concatenation. Only
// real frames (which own a latent) ever take this path.
std::vector<double> warp_ray_rep(const Ray& ray, const RayRepConfig& cfg,
                                 const Vector& latent, const WarpNet& net);

}  // namespace nelf
