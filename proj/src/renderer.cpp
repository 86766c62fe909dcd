#include "nelf/renderer.hpp"

#include <algorithm>

namespace nelf {

void ModelConfig::validate() const {
  ray.validate();
  check(d_e >= 1, "model: d_e must be >= 1");
  check(n_lf >= 1 && d_lf >= 1, "model: bank dimensions must be >= 1");
  check(enc_width >= 1 && nelf_width >= 1 && sr_width >= 1 && warp_width >= 1,
        "model: widths must be >= 1");
  check(nelf_blocks >= 1 && sr_blocks >= 1, "model: block counts must be >= 1");
  check(sr_scale == 4, "model: SR scale is fixed at x4");
  check(latent_dim >= 1, "model: latent_dim must be >= 1");
  check(pe_raw_code >= 0, "model: pe_raw_code must be >= 0");
}

void ModelBundle::init(const ModelConfig& cfg_, uint64_t seed) {
  cfg = cfg_;
  cfg.validate();
  Rng r_enc = Rng::with_tag(seed, 1);
  Rng r_nelf = Rng::with_tag(seed, 2);
  Rng r_sr = Rng::with_tag(seed, 3);
  Rng r_warp = Rng::with_tag(seed, 4);
  Rng r_lat = Rng::with_tag(seed, 5);

  encoder.init(cfg.d_e, cfg.n_lf, cfg.d_lf, cfg.enc_width, cfg.enc_blocks,
               cfg.rep_dim(), r_enc);
  nelf.init(cfg.nelf_in_dim(), cfg.nelf_width, cfg.nelf_blocks, 3, r_nelf);
  nelf.long_skip = true;
  sr.init(cfg.sr_width, cfg.sr_blocks, r_sr);
  warp.init(cfg.latent_dim, cfg.warp_width, cfg.warp_blocks, cfg.warp_pe, r_warp);
  latents.setZero(cfg.n_latents, cfg.latent_dim);
  for (int i = 0; i < latents.rows(); ++i)
    for (int j = 0; j < latents.cols(); ++j) latents(i, j) = r_lat.normal(0.0, 0.01);
  g_latents.setZero(cfg.n_latents, cfg.latent_dim);
}

void ModelBundle::zero_grad() {
  encoder.zero_grad();
  nelf.zero_grad();
  sr.zero_grad();
  warp.zero_grad();
  g_latents.setZero();
}

void ModelBundle::visit_params(const ParamVisitor& fn) {
  encoder.visit("enc", fn);
  nelf.visit("nelf", fn);
  sr.visit("sr", fn);
  warp.visit("warp", fn);
  fn({"latents", latents.data(), static_cast<size_t>(latents.size()),
      {static_cast<int>(latents.rows()), static_cast<int>(latents.cols())}});
}

void ModelBundle::visit_grads(const ParamVisitor& fn) {
  encoder.visit_grads("enc", fn);
  nelf.visit_grads("nelf", fn);
  sr.visit_grads("sr", fn);
  warp.visit_grads("warp", fn);
  fn({"latents", g_latents.data(), static_cast<size_t>(g_latents.size()),
      {static_cast<int>(g_latents.rows()), static_cast<int>(g_latents.cols())}});
}

size_t ModelBundle::param_count() {
  size_t n = 0;
  visit_params([&](const ParamView& p) { n += p.size; });
  return n;
}

std::vector<double> assemble_input(const std::vector<double>& ray_rep,
                                   const std::vector<double>& i_exp) {
  std::vector<double> out;
  out.reserve(ray_rep.size() + i_exp.size());
  out.insert(out.end(), ray_rep.begin(), ray_rep.end());
  out.insert(out.end(), i_exp.begin(), i_exp.end());
  return out;
}

Vec3 nelf_forward(const std::vector<double>& input, const ResidualMlp& nelf) {
  check(static_cast<int>(input.size()) == nelf.in_dim(),
        "nelf_forward: input dimension mismatch");
  Matrix x = Eigen::Map<const Vector>(input.data(), input.size()).transpose();
  Matrix y = nelf_forward_rows(x, nelf);
  return Vec3(y(0, 0), y(0, 1), y(0, 2));
}

Matrix nelf_forward_rows(const Matrix& inputs, const ResidualMlp& nelf) {
  check(inputs.cols() == nelf.in_dim(), "nelf: input dimension mismatch");
  counters().nelf_evals.fetch_add(static_cast<uint64_t>(inputs.rows()),
                                  std::memory_order_relaxed);
  return nelf.forward(inputs);
}

Matrix nelf_forward_rows(const Matrix& inputs, const ResidualMlp& nelf,
                         MlpCache& cache) {
  check(inputs.cols() == nelf.in_dim(), "nelf: input dimension mismatch");
  counters().nelf_evals.fetch_add(static_cast<uint64_t>(inputs.rows()),
                                  std::memory_order_relaxed);
  return nelf.forward(inputs, cache);
}

Matrix encode_ray_batch(const std::vector<Ray>& rays, const RayRepConfig& cfg,
                        const std::optional<Mat3>& shoulder_rotation,
                        double ortho_tol) {
  const int n = static_cast<int>(rays.size());
  const int enc_dim = cfg.encoded_dim(shoulder_rotation.has_value());
  Matrix reps(n, enc_dim);
  std::vector<double> enc(static_cast<size_t>(enc_dim));
  for (int i = 0; i < n; ++i) {
    std::vector<double> raw =
        shoulder_rotation ? shoulder_ray_rep(rays[i], *shoulder_rotation, cfg, ortho_tol)
                          : point_concat(rays[i], cfg);
    positional_encode_into(raw.data(), static_cast<int>(raw.size()), cfg.pe_freqs,
                           cfg.include_input, enc.data());
    reps.row(i) = Eigen::Map<const Vector>(enc.data(), enc_dim).transpose();
  }
  return reps;
}

Matrix expression_rows(const ModelBundle& bundle, const Matrix& reps, const Vector& e) {
  const ModelConfig& cfg = bundle.cfg;
  if (cfg.expression_mode == ExpressionMode::Raw) {
    std::vector<double> code(e.data(), e.data() + e.size());
    std::vector<double> enc = positional_encode(code, cfg.pe_raw_code, true);
    Matrix out(reps.rows(), static_cast<int>(enc.size()));
    out = Eigen::Map<const Vector>(enc.data(), enc.size())
              .transpose()
              .replicate(reps.rows(), 1);
    return out;
  }
  Matrix bank = bundle.encoder.local_feature_bank(e);
  Matrix attn_in(reps.rows(), cfg.attn_in_dim());
  attn_in.leftCols(reps.cols()) = reps;
  attn_in.rightCols(cfg.d_e) = e.transpose().replicate(reps.rows(), 1);
  Matrix weights = bundle.encoder.spatial_attention(attn_in);
  return expression_representation(weights, bank);
}

Tensor3 render_lr(const Vector& e, const CameraPose& camera,
                  const std::optional<Mat3>& shoulder_rotation,
                  const ModelBundle& bundle, double ortho_tol) {
  check(e.size() == bundle.cfg.d_e, "render_lr: expression dimension mismatch");
  check(!bundle.cfg.shoulder || shoulder_rotation.has_value(),
        "render_lr: model expects a shoulder rotation");
  std::vector<Ray> rays = generate_rays(camera, ortho_tol);
  Matrix reps = encode_ray_batch(
      rays, bundle.cfg.ray, bundle.cfg.shoulder ? shoulder_rotation : std::nullopt,
      ortho_tol);
  Matrix i_exp = expression_rows(bundle, reps, e);
  Matrix x(reps.rows(), bundle.cfg.nelf_in_dim());
  x.leftCols(reps.cols()) = reps;
  x.rightCols(i_exp.cols()) = i_exp;
  Matrix rgb = nelf_forward_rows(x, bundle.nelf);

  Tensor3 img(3, camera.height, camera.width);
  for (int v = 0; v < camera.height; ++v)
    for (int u = 0; u < camera.width; ++u)
      for (int c = 0; c < 3; ++c)
        img.at(c, v, u) = rgb(v * camera.width + u, c);
  return img;
}

Tensor3 sr_upsample(const Tensor3& lr, const SrNet& sr) {
  check(lr.c == 3, "sr_upsample: expected a 3-channel input");
  return sr.forward(lr);
}

Image render(const Vector& e, const CameraPose& camera_hr,
             const std::optional<Mat3>& shoulder_rotation, const ModelBundle& bundle,
             double ortho_tol) {
  check(camera_hr.width % 4 == 0 && camera_hr.height % 4 == 0,
        "render: resolution must be divisible by 4");
  const CameraPose camera_lr = camera_hr.scaled(4);
  Tensor3 lr = render_lr(e, camera_lr, shoulder_rotation, bundle, ortho_tol);
  Tensor3 hr = sr_upsample(lr, bundle.sr);
  for (double& v : hr.v) v = std::min(1.0, std::max(0.0, v));
  return from_tensor(hr);
}

}  // namespace nelf
