#include "nelf/training.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "nelf/serialize.hpp"

namespace nelf {

namespace {

constexpr char kCkptMagic[7] = {'L', 'A', 'V', 'C', 'K', '1', '\0'};
constexpr uint16_t kCkptVersion = 1;

bool name_in_prefixes(const std::string& name, const std::vector<std::string>& prefixes) {
  for (const auto& p : prefixes)
    if (name == p || (name.size() > p.size() && name.compare(0, p.size(), p) == 0 &&
                      name[p.size()] == '.'))
      return true;
  return false;
}

}  // namespace

std::vector<TrainFrame> build_train_frames(const std::vector<ExpressionFrame>& frames,
                                           int lr_scale) {
  std::vector<TrainFrame> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    check(f.camera.width % lr_scale == 0 && f.camera.height % lr_scale == 0,
          "build_train_frames: resolution not divisible by LR scale");
    TrainFrame t;
    t.e = f.e;
    t.shoulder = f.shoulder_rotation;
    t.kind = f.kind;
    t.frame_index = f.frame_index;
    t.lr_camera = f.camera.scaled(lr_scale);
    t.lr_camera.validate(kRelaxedOrthoTol);
    t.lr_h = t.lr_camera.height;
    t.lr_w = t.lr_camera.width;
    t.lr_rays = generate_rays(t.lr_camera, kRelaxedOrthoTol);
    const int n = t.lr_h * t.lr_w;
    t.lr_targets.resize(n, 3);
    for (int v = 0; v < t.lr_h; ++v) {
      for (int u = 0; u < t.lr_w; ++u) {
        double acc[3] = {0, 0, 0};
        for (int dy = 0; dy < lr_scale; ++dy)
          for (int dx = 0; dx < lr_scale; ++dx)
            for (int c = 0; c < 3; ++c)
              acc[c] += f.image.at(v * lr_scale + dy, u * lr_scale + dx, c);
        for (int c = 0; c < 3; ++c)
          t.lr_targets(v * t.lr_w + u, c) = acc[c] / (lr_scale * lr_scale);
      }
    }
    t.hr = f.image;
    out.push_back(std::move(t));
  }
  return out;
}

Matrix forward_rays_train(const ModelBundle& bundle, const Vector& e,
                          const std::vector<Ray>& rays,
                          const std::optional<Mat3>& shoulder, int use_latent,
                          RayForwardCache& cache) {
  const ModelConfig& cfg = bundle.cfg;
  const RayRepConfig& ray_cfg = cfg.ray;
  const int n = static_cast<int>(rays.size());
  const bool with_shoulder = cfg.shoulder;
  check(!with_shoulder || shoulder.has_value(),
        "forward_rays_train: model expects a shoulder rotation");
  const int k = ray_cfg.k_samples;
  const int raw_total = ray_cfg.raw_dim() * (with_shoulder ? 2 : 1);
  const int enc_dim = cfg.rep_dim();

  cache.n = n;
  cache.warped = use_latent >= 0;
  cache.latent_row = use_latent;
  cache.shoulder = with_shoulder ? shoulder : std::nullopt;
  cache.raw.assign(static_cast<size_t>(n) * raw_total, 0.0);

  // Sample, optionally warp, then lay out [base | shoulder-frame] points.
  std::vector<Vec3> points(static_cast<size_t>(n) * k);
  for (int i = 0; i < n; ++i) {
    std::vector<double> base = point_concat(rays[i], ray_cfg);
    for (int j = 0; j < k; ++j)
      points[static_cast<size_t>(i) * k + j] =
          Vec3(base[3 * j], base[3 * j + 1], base[3 * j + 2]);
  }
  if (cache.warped) {
    check(use_latent < bundle.latents.rows(),
          "forward_rays_train: frame has no latent (pseudo frames bypass warping)");
    bundle.warp.warp_points(points, bundle.latents.row(use_latent).transpose(),
                            cache.warp_cache);
  }
  const Mat3 s_inv = with_shoulder ? Mat3(shoulder->inverse()) : Mat3::Identity();
  for (int i = 0; i < n; ++i) {
    double* row = cache.raw.data() + static_cast<size_t>(i) * raw_total;
    for (int j = 0; j < k; ++j) {
      const Vec3& p = points[static_cast<size_t>(i) * k + j];
      row[3 * j + 0] = p.x();
      row[3 * j + 1] = p.y();
      row[3 * j + 2] = p.z();
      if (with_shoulder) {
        const Vec3 q = s_inv * p;
        row[3 * k + 3 * j + 0] = q.x();
        row[3 * k + 3 * j + 1] = q.y();
        row[3 * k + 3 * j + 2] = q.z();
      }
    }
  }

  cache.reps.resize(n, enc_dim);
  std::vector<double> enc(static_cast<size_t>(enc_dim));
  for (int i = 0; i < n; ++i) {
    positional_encode_into(cache.raw.data() + static_cast<size_t>(i) * raw_total,
                           raw_total, ray_cfg.pe_freqs, ray_cfg.include_input,
                           enc.data());
    cache.reps.row(i) = Eigen::Map<const Vector>(enc.data(), enc_dim).transpose();
  }

  Matrix i_exp;
  if (cfg.expression_mode == ExpressionMode::Bank) {
    cache.bank = bundle.encoder.local_feature_bank(e, cache.feat_cache);
    cache.attn_in.resize(n, cfg.attn_in_dim());
    cache.attn_in.leftCols(enc_dim) = cache.reps;
    cache.attn_in.rightCols(cfg.d_e) = e.transpose().replicate(n, 1);
    cache.weights = bundle.encoder.spatial_attention(cache.attn_in, cache.attn_cache);
    i_exp = expression_representation(cache.weights, cache.bank);
  } else {
    std::vector<double> code(e.data(), e.data() + e.size());
    std::vector<double> enc_code = positional_encode(code, cfg.pe_raw_code, true);
    i_exp = Eigen::Map<const Vector>(enc_code.data(), enc_code.size())
                .transpose()
                .replicate(n, 1);
  }

  cache.x.resize(n, cfg.nelf_in_dim());
  cache.x.leftCols(enc_dim) = cache.reps;
  cache.x.rightCols(i_exp.cols()) = i_exp;
  return nelf_forward_rows(cache.x, bundle.nelf, cache.nelf_cache);
}

void backward_rays_train(ModelBundle& bundle, const RayForwardCache& cache,
                         const Matrix& d_rgb) {
  const ModelConfig& cfg = bundle.cfg;
  const int enc_dim = cfg.rep_dim();
  Matrix dx = bundle.nelf.backward(cache.nelf_cache, d_rgb);
  Matrix d_reps = dx.leftCols(enc_dim);

  if (cfg.expression_mode == ExpressionMode::Bank) {
    Matrix d_iexp = dx.rightCols(cfg.d_lf);
    Matrix d_weights = d_iexp * cache.bank.transpose();
    Matrix d_bank = cache.weights.transpose() * d_iexp;
    Matrix d_attn_in = bundle.encoder.attention_backward(cache.attn_cache, d_weights);
    d_reps += d_attn_in.leftCols(enc_dim);
    bundle.encoder.feature_bank_backward(cache.feat_cache, d_bank);
  }

  if (!cache.warped) return;

  // Gradients w.r.t. the warped points, through the positional encoding and
  // (when present) the shoulder-frame copy of each point.
  const RayRepConfig& ray_cfg = cfg.ray;
  const int k = ray_cfg.k_samples;
  const bool with_shoulder = cache.shoulder.has_value();
  const int raw_total = ray_cfg.raw_dim() * (with_shoulder ? 2 : 1);
  const Mat3 s_inv_t =
      with_shoulder ? Mat3(cache.shoulder->inverse().transpose()) : Mat3::Identity();

  std::vector<Vec3> d_points(static_cast<size_t>(cache.n) * k);
  std::vector<double> d_enc(static_cast<size_t>(enc_dim));
  std::vector<double> d_raw(static_cast<size_t>(raw_total));
  for (int i = 0; i < cache.n; ++i) {
    Eigen::Map<Vector>(d_enc.data(), enc_dim) = d_reps.row(i).transpose();
    positional_encode_backward(cache.raw.data() + static_cast<size_t>(i) * raw_total,
                               raw_total, ray_cfg.pe_freqs, ray_cfg.include_input,
                               d_enc.data(), d_raw.data());
    for (int j = 0; j < k; ++j) {
      Vec3 g(d_raw[3 * j], d_raw[3 * j + 1], d_raw[3 * j + 2]);
      if (with_shoulder) {
        const Vec3 gq(d_raw[3 * k + 3 * j], d_raw[3 * k + 3 * j + 1],
                      d_raw[3 * k + 3 * j + 2]);
        g += s_inv_t * gq;
      }
      d_points[static_cast<size_t>(i) * k + j] = g;
    }
  }

  Vector d_latent = Vector::Zero(cfg.latent_dim);
  bundle.warp.backward(cache.warp_cache, d_points, d_latent);
  bundle.g_latents.row(cache.latent_row) += d_latent.transpose();
}

double ray_loss_and_grad(ModelBundle& bundle, const TrainFrame& frame,
                         const std::vector<int>& ray_idx, bool use_warp,
                         double grad_scale) {
  const int n = static_cast<int>(ray_idx.size());
  std::vector<Ray> rays(static_cast<size_t>(n));
  Matrix targets(n, 3);
  for (int i = 0; i < n; ++i) {
    rays[i] = frame.lr_rays[static_cast<size_t>(ray_idx[i])];
    targets.row(i) = frame.lr_targets.row(ray_idx[i]);
  }
  RayForwardCache cache;
  const int latent = use_warp ? frame.frame_index : -1;
  Matrix rgb = forward_rays_train(bundle, frame.e, rays, frame.shoulder, latent, cache);
  Matrix diff = rgb - targets;
  const double inv = 1.0 / (3.0 * n);
  const double loss = diff.squaredNorm() * inv;
  Matrix d_rgb = (2.0 * inv * grad_scale) * diff;
  backward_rays_train(bundle, cache, d_rgb);
  return loss;
}

double image_loss_and_grad(ModelBundle& bundle, const TrainFrame& frame, bool use_warp,
                           const LossConfig& loss_cfg,
                           const PerceptualExtractor* extractor, double grad_scale,
                           Tensor3* pred_out) {
  RayForwardCache cache;
  const int latent = use_warp ? frame.frame_index : -1;
  Matrix rgb =
      forward_rays_train(bundle, frame.e, frame.lr_rays, frame.shoulder, latent, cache);

  Tensor3 lr(3, frame.lr_h, frame.lr_w);
  for (int i = 0; i < rgb.rows(); ++i)
    for (int c = 0; c < 3; ++c) lr.at(c, i / frame.lr_w, i % frame.lr_w) = rgb(i, c);

  SrCache sr_cache;
  Tensor3 pred = bundle.sr.forward(lr, sr_cache);
  if (pred_out) *pred_out = pred;

  Tensor3 target = to_tensor(frame.hr);
  Tensor3 d_pred;
  const double loss =
      photometric_perceptual_loss_grad(pred, target, loss_cfg, extractor, d_pred);
  if (grad_scale != 1.0)
    for (double& g : d_pred.v) g *= grad_scale;

  Tensor3 d_lr = bundle.sr.backward(sr_cache, d_pred);
  Matrix d_rgb(rgb.rows(), 3);
  for (int i = 0; i < rgb.rows(); ++i)
    for (int c = 0; c < 3; ++c) d_rgb(i, c) = d_lr.at(c, i / frame.lr_w, i % frame.lr_w);
  backward_rays_train(bundle, cache, d_rgb);
  return loss;
}

std::vector<std::string> stage_prefixes(Stage stage, ExpressionMode mode) {
  std::vector<std::string> p;
  if (mode == ExpressionMode::Bank) p.push_back("enc");
  p.push_back("nelf");
  if (stage == Stage::Stage2 || stage == Stage::Finetune) p.push_back("sr");
  if (stage == Stage::Finetune) {
    p.push_back("warp");
    p.push_back("latents");
  }
  return p;
}

double stage_base_lr(const RunConfig& cfg, Stage stage) {
  switch (stage) {
    case Stage::Stage1:
      return cfg.lr_stage1;
    case Stage::Stage2:
      return cfg.lr_stage2;
    case Stage::Finetune:
      return cfg.lr_finetune;
  }
  return cfg.lr_stage1;
}

double lr_at(const RunConfig& cfg, Stage stage, uint64_t stage_iter) {
  const double base = stage_base_lr(cfg, stage);
  const uint64_t decays = stage_iter / cfg.lr_decay_every;
  return base * std::pow(cfg.lr_decay_factor, static_cast<double>(decays));
}

Adam Adam::create(ModelBundle& bundle, const std::vector<std::string>& prefixes,
                  const RunConfig& cfg) {
  Adam a;
  a.beta1 = cfg.adam_beta1;
  a.beta2 = cfg.adam_beta2;
  a.eps = cfg.adam_eps;
  bundle.visit_params([&](const ParamView& p) {
    if (name_in_prefixes(p.name, prefixes)) a.params.push_back(p);
  });
  bundle.visit_grads([&](const ParamView& g) {
    if (name_in_prefixes(g.name, prefixes)) a.grads.push_back(g);
  });
  check(a.params.size() == a.grads.size(), "adam: param/grad group mismatch");
  for (const auto& p : a.params) a.total += p.size;
  a.m = Vector::Zero(static_cast<Eigen::Index>(a.total));
  a.v = Vector::Zero(static_cast<Eigen::Index>(a.total));
  return a;
}

void Adam::step(double lr) {
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  size_t off = 0;
  for (size_t gi = 0; gi < params.size(); ++gi) {
    double* p = params[gi].data;
    const double* g = grads[gi].data;
    for (size_t i = 0; i < params[gi].size; ++i) {
      double& mi = m(static_cast<Eigen::Index>(off + i));
      double& vi = v(static_cast<Eigen::Index>(off + i));
      mi = beta1 * mi + (1.0 - beta1) * g[i];
      vi = beta2 * vi + (1.0 - beta2) * g[i] * g[i];
      p[i] -= lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps);
    }
    off += params[gi].size;
  }
}

namespace {

std::vector<int> sample_distinct(Rng& rng, int n, int count) {
  std::vector<int> out;
  out.reserve(static_cast<size_t>(count));
  if (count >= n) {
    for (int i = 0; i < n; ++i) out.push_back(i);
    return out;
  }
  std::vector<bool> used(static_cast<size_t>(n), false);
  while (static_cast<int>(out.size()) < count) {
    const int idx = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(n)));
    if (used[static_cast<size_t>(idx)]) continue;
    used[static_cast<size_t>(idx)] = true;
    out.push_back(idx);
  }
  return out;
}

uint64_t iter_tag(Stage stage, uint64_t stage_iter) {
  return (static_cast<uint64_t>(stage) << 48) + stage_iter;
}

}  // namespace

void run_stage(Stage stage, ModelBundle& bundle, Adam& adam,
               const std::vector<TrainFrame>& pseudo,
               const std::vector<TrainFrame>& real, const RunConfig& cfg,
               uint64_t start_stage_iter, uint64_t n_iters,
               const PerceptualExtractor* extractor, LossLog* log) {
  check(!pseudo.empty(), "run_stage: pseudo dataset is empty");
  if (stage == Stage::Finetune)
    check(!real.empty(), "run_stage: finetune requires real frames");
  LossConfig loss_cfg{cfg.lambda_perc};
  if (cfg.lambda_perc > 0.0 && stage != Stage::Stage1)
    check(extractor != nullptr, "run_stage: perceptual extractor required");

  for (uint64_t j = 0; j < n_iters; ++j) {
    const uint64_t it = start_stage_iter + j;
    Rng rng = Rng::with_tag(cfg.seed, iter_tag(stage, it));
    bundle.zero_grad();
    double loss = 0.0;

    if (stage == Stage::Stage1) {
      const int fpb = std::min(cfg.stage1_frames_per_batch,
                               static_cast<int>(pseudo.size()));
      const int rays_per_frame = cfg.batch_rays / cfg.stage1_frames_per_batch;
      const auto frame_ids = sample_distinct(rng, static_cast<int>(pseudo.size()), fpb);
      const int n_total = static_cast<int>(frame_ids.size()) * rays_per_frame;
      double acc = 0.0;
      for (int fi : frame_ids) {
        const TrainFrame& f = pseudo[static_cast<size_t>(fi)];
        std::vector<int> idx(static_cast<size_t>(rays_per_frame));
        for (auto& v : idx)
          v = static_cast<int>(rng.uniform_index(f.lr_rays.size()));
        // Per-frame MSE carries weight n_f / n_total in the batch mean.
        const double w = static_cast<double>(rays_per_frame) / n_total;
        acc += w * ray_loss_and_grad(bundle, f, idx, false, w);
      }
      loss = acc;
    } else {
      const int n_img = std::min(cfg.batch_images,
                                 static_cast<int>(pseudo.size() + real.size()));
      int n_real = 0;
      if (stage == Stage::Finetune) {
        n_real = std::min(static_cast<int>(real.size()),
                          static_cast<int>(std::lround(n_img * cfg.finetune_real_frac)));
      }
      const int n_pseudo = std::min(static_cast<int>(pseudo.size()), n_img - n_real);
      const double w = 1.0 / (n_real + n_pseudo);
      const auto real_ids = sample_distinct(rng, static_cast<int>(real.size()), n_real);
      const auto pseudo_ids =
          sample_distinct(rng, static_cast<int>(pseudo.size()), n_pseudo);
      double acc = 0.0;
      for (int fi : real_ids)
        acc += w * image_loss_and_grad(bundle, real[static_cast<size_t>(fi)],
                                       cfg.finetune_warp, loss_cfg, extractor, w);
      for (int fi : pseudo_ids)
        acc += w * image_loss_and_grad(bundle, pseudo[static_cast<size_t>(fi)], false,
                                       loss_cfg, extractor, w);
      loss = acc;
    }

    adam.step(lr_at(cfg, stage, it));
    if (log && (it % cfg.log_every == 0 || j + 1 == n_iters))
      log->emplace_back(it, loss);
  }
}

namespace {

void quantize_to_f32(double* p, size_t n) {
  for (size_t i = 0; i < n; ++i) p[i] = static_cast<double>(static_cast<float>(p[i]));
}

void write_group(std::ostream& os, const ParamView& p) {
  write_string(os, p.name);
  write_le<uint8_t>(os, static_cast<uint8_t>(p.shape.size()));
  for (int d : p.shape) write_le<uint32_t>(os, static_cast<uint32_t>(d));
  write_f32_array(os, p.data, p.size);
}

}  // namespace

void save_checkpoint(const std::string& path, ModelBundle& bundle, Adam* adam,
                     uint64_t iteration, uint64_t arch_hash) {
  // Commit live state to serialized (float32) precision first, so a resumed
  // run and the continuing run share bit-identical parameters.
  bundle.visit_params([](const ParamView& p) { quantize_to_f32(p.data, p.size); });
  if (adam) {
    quantize_to_f32(adam->m.data(), static_cast<size_t>(adam->m.size()));
    quantize_to_f32(adam->v.data(), static_cast<size_t>(adam->v.size()));
  }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("save_checkpoint: cannot open " + path);
  write_bytes(os, kCkptMagic, sizeof(kCkptMagic));
  write_le<uint16_t>(os, kCkptVersion);
  write_le<uint64_t>(os, arch_hash);
  write_le<uint64_t>(os, iteration);

  uint32_t group_count = 0;
  bundle.visit_params([&](const ParamView&) { ++group_count; });
  write_le<uint32_t>(os, group_count);
  bundle.visit_params([&](const ParamView& p) { write_group(os, p); });

  write_le<uint8_t>(os, adam ? 1 : 0);
  if (adam) {
    write_le<uint64_t>(os, adam->t);
    write_le<uint64_t>(os, static_cast<uint64_t>(adam->m.size()));
    write_f32_array(os, adam->m.data(), static_cast<size_t>(adam->m.size()));
    write_f32_array(os, adam->v.data(), static_cast<size_t>(adam->v.size()));
  }
  if (!os) throw IoError("save_checkpoint: write failed for " + path);
}

CheckpointInfo load_checkpoint(const std::string& path, ModelBundle& bundle,
                               Adam* adam, uint64_t expected_hash) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("load_checkpoint: cannot open " + path);
  char magic[sizeof(kCkptMagic)];
  read_bytes(is, magic, sizeof(kCkptMagic), "checkpoint magic");
  if (std::memcmp(magic, kCkptMagic, sizeof(kCkptMagic)) != 0)
    throw IoError("load_checkpoint: bad magic in " + path);
  const auto version = read_le<uint16_t>(is, "checkpoint version");
  if (version != kCkptVersion)
    throw IoError("load_checkpoint: unsupported version " + std::to_string(version));
  const auto hash = read_le<uint64_t>(is, "checkpoint config hash");
  if (hash != expected_hash)
    throw IncompatibleError("load_checkpoint: config hash mismatch (checkpoint " +
                            std::to_string(hash) + ", config " +
                            std::to_string(expected_hash) + ")");
  CheckpointInfo info;
  info.iteration = read_le<uint64_t>(is, "checkpoint iteration");

  struct StoredGroup {
    std::vector<int> shape;
    std::vector<double> data;
  };
  std::map<std::string, StoredGroup> stored;
  const auto group_count = read_le<uint32_t>(is, "checkpoint group count");
  for (uint32_t g = 0; g < group_count; ++g) {
    const std::string name = read_string(is, "group name");
    const auto ndims = read_le<uint8_t>(is, "group ndims");
    StoredGroup sg;
    size_t n = 1;
    for (int d = 0; d < ndims; ++d) {
      sg.shape.push_back(static_cast<int>(read_le<uint32_t>(is, "group dim")));
      n *= static_cast<size_t>(sg.shape.back());
    }
    sg.data.resize(n);
    read_f32_array(is, sg.data.data(), n, "group data");
    stored.emplace(name, std::move(sg));
  }

  // Validate the full group set before touching the bundle: no partial loads.
  size_t expected_groups = 0;
  std::string mismatch;
  bundle.visit_params([&](const ParamView& p) {
    ++expected_groups;
    auto it = stored.find(p.name);
    if (it == stored.end()) {
      if (mismatch.empty()) mismatch = "missing group " + p.name;
    } else if (it->second.shape != p.shape) {
      if (mismatch.empty()) mismatch = "shape mismatch for " + p.name;
    }
  });
  if (!mismatch.empty())
    throw IncompatibleError("load_checkpoint: " + mismatch);
  if (expected_groups != stored.size())
    throw IncompatibleError("load_checkpoint: unexpected extra parameter groups");

  bundle.visit_params([&](const ParamView& p) {
    const auto& sg = stored.at(p.name);
    std::memcpy(p.data, sg.data.data(), p.size * sizeof(double));
  });

  const auto opt_flag = read_le<uint8_t>(is, "optimizer flag");
  if (opt_flag && adam) {
    adam->t = read_le<uint64_t>(is, "optimizer t");
    const auto n = read_le<uint64_t>(is, "optimizer size");
    if (n != static_cast<uint64_t>(adam->m.size()))
      throw IncompatibleError("load_checkpoint: optimizer state size mismatch");
    read_f32_array(is, adam->m.data(), n, "optimizer m");
    read_f32_array(is, adam->v.data(), n, "optimizer v");
    info.optimizer_loaded = true;
  }
  return info;
}

uint64_t stage_start_iteration(const RunConfig& cfg, Stage stage) {
  switch (stage) {
    case Stage::Stage1:
      return 0;
    case Stage::Stage2:
      return cfg.stage1_iters;
    case Stage::Finetune:
      return cfg.stage1_iters + cfg.stage2_iters;
  }
  return 0;
}

uint64_t stage_total_iters(const RunConfig& cfg, Stage stage) {
  switch (stage) {
    case Stage::Stage1:
      return cfg.stage1_iters;
    case Stage::Stage2:
      return cfg.stage2_iters;
    case Stage::Finetune:
      return cfg.finetune_iters;
  }
  return 0;
}

}  // namespace nelf
