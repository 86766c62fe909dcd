#pragma once

#include <string>
#include <vector>

#include "nelf/dataset.hpp"
#include "nelf/renderer.hpp"

namespace nelf {

// Every hyperparameter of the pipeline plus the master seed. Serialized as
// key=value lines; unknown keys are rejected. A 64-bit hash over the
// architecture-defining subset ties checkpoints to compatible configs.
struct RunConfig {
  uint64_t seed = 1234;

  // model
  int d_e = 4;
  int k_samples = 8;
  double near = 1.0;
  double far = 4.0;
  int pe_ray = 4;
  bool pe_include_input = true;
  bool shoulder = false;
  std::string expression_mode = "bank";  // bank | raw
  int pe_raw_code = 4;
  int n_lf = 16;
  int d_lf = 32;
  int enc_width = 64;
  int enc_blocks = 2;
  int nelf_width = 64;
  int nelf_blocks = 4;
  int sr_width = 24;
  int sr_blocks = 3;
  int warp_width = 32;
  int warp_blocks = 2;
  int warp_pe = 4;
  int latent_dim = 16;

  // scene / data
  double scene_radius = 0.5;
  int image_size = 64;
  int pseudo_count = 2000;
  int real_count = 200;
  int holdout_count = 50;
  double noise_sigma_e = 0.05;
  double noise_sigma_rot_deg = 1.0;
  double noise_sigma_trans = 0.01;

  // loss
  double lambda_perc = 0.005;
  uint64_t perc_seed = 77;

  // optimizer / schedule
  double lr_stage1 = 5e-4;
  double lr_stage2 = 1e-4;
  double lr_finetune = 1e-5;
  double lr_decay_factor = 0.2;
  uint64_t lr_decay_every = 30000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t stage1_iters = 30000;
  uint64_t stage2_iters = 10000;
  uint64_t finetune_iters = 2000;
  int batch_rays = 4096;
  int stage1_frames_per_batch = 16;
  int batch_images = 8;
  double finetune_real_frac = 0.5;
  bool finetune_warp = true;  // ablation switch: route real rays through the warp
  uint64_t log_every = 100;

  void validate() const;

  ModelConfig model() const;
  SceneParams scene() const;
  NoiseParams noise() const;

  // Canonical key=value serialization (fixed key order).
  std::string serialize() const;
  // FNV-1a over the architecture-defining keys.
  uint64_t arch_hash() const;

  void apply_override(const std::string& key, const std::string& value);

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  void save(const std::string& path) const;
};

}  // namespace nelf
