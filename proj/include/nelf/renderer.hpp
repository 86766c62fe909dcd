#pragma once

#include <optional>

#include "nelf/conv.hpp"
#include "nelf/encoder.hpp"
#include "nelf/geometry.hpp"
#include "nelf/image.hpp"
#include "nelf/warp.hpp"

namespace nelf {

enum class ExpressionMode { Bank, Raw };

// Architecture-defining knobs shared by the bundle, the flops counter and
// the checkpoint compatibility hash.
struct ModelConfig {
  int d_e = 4;
  RayRepConfig ray;
  bool shoulder = false;
  ExpressionMode expression_mode = ExpressionMode::Bank;
  int pe_raw_code = 4;  // raw mode: I_exp = PE(e)
  int n_lf = 16;
  int d_lf = 32;
  int enc_width = 64;
  int enc_blocks = 2;
  int nelf_width = 64;
  int nelf_blocks = 4;
  int sr_width = 24;
  int sr_blocks = 3;
  int sr_scale = 4;  // two x2 transposed-conv stages
  int warp_width = 32;
  int warp_blocks = 2;
  int warp_pe = 4;
  int latent_dim = 16;
  int n_latents = 0;  // one per real training frame

  int rep_dim() const { return ray.encoded_dim(shoulder); }
  int exp_dim() const {
    return expression_mode == ExpressionMode::Bank ? d_lf
                                                   : d_e * (2 * pe_raw_code + 1);
  }
  int nelf_in_dim() const { return rep_dim() + exp_dim(); }
  int attn_in_dim() const { return rep_dim() + d_e; }

  void validate() const;
};

// All trainable state: encoder networks, NeLF backbone, SR network, warping
// network and the per-real-frame latent table.
struct ModelBundle {
  ModelConfig cfg;
  ExpressionEncoder encoder;
  ResidualMlp nelf;
  SrNet sr;
  WarpNet warp;
  Matrix latents;    // n_latents x latent_dim
  Matrix g_latents;

  void init(const ModelConfig& cfg_, uint64_t seed);

  void zero_grad();
  void visit_params(const ParamVisitor& fn);
  void visit_grads(const ParamVisitor& fn);
  size_t param_count();
};

// I = concat(I_ray, I_exp), ray part first.
std::vector<double> assemble_input(const std::vector<double>& ray_rep,
                                   const std::vector<double>& i_exp);

// Single-ray forward through the NeLF backbone.
Vec3 nelf_forward(const std::vector<double>& input, const ResidualMlp& nelf);

// Batched NeLF forward; counts one evaluation per row.
Matrix nelf_forward_rows(const Matrix& inputs, const ResidualMlp& nelf);
Matrix nelf_forward_rows(const Matrix& inputs, const ResidualMlp& nelf, MlpCache& cache);

// Encoded ray representations for a batch of rays (optionally shoulder
// extended), one row per ray. No warping: this is the inference path.
Matrix encode_ray_batch(const std::vector<Ray>& rays, const RayRepConfig& cfg,
                        const std::optional<Mat3>& shoulder_rotation,
                        double ortho_tol = 1e-6);

// Per-ray expression representations given encoded reps; evaluates the bank
// exactly once. In raw mode the bank/attention networks are bypassed.
Matrix expression_rows(const ModelBundle& bundle, const Matrix& reps, const Vector& e);

// Full low-resolution pass: one NeLF evaluation per pixel.
Tensor3 render_lr(const Vector& e, const CameraPose& camera,
                  const std::optional<Mat3>& shoulder_rotation,
                  const ModelBundle& bundle, double ortho_tol = 1e-6);

// x4 super-resolution; body runs entirely at input resolution.
Tensor3 sr_upsample(const Tensor3& lr, const SrNet& sr);

// High-resolution render: derives the /4 camera, runs render_lr, upsamples,
// clamps to [0,1]. Resolution must be divisible by 4.
Image render(const Vector& e, const CameraPose& camera_hr,
             const std::optional<Mat3>& shoulder_rotation, const ModelBundle& bundle,
             double ortho_tol = 1e-6);

}  // namespace nelf
