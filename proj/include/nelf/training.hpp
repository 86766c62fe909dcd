#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nelf/config.hpp"
#include "nelf/dataset.hpp"
#include "nelf/loss.hpp"
#include "nelf/renderer.hpp"

namespace nelf {

// Interpolated pseudo cameras are literal matrix blends; this tolerance
// admits them while still rejecting degenerate poses.
constexpr double kRelaxedOrthoTol = 0.75;

// Per-frame training data: LR pixel rays with box-downsampled targets for the
// ray-based stage, plus the HR image for the image-based stages.
struct TrainFrame {
  Vector e;
  std::optional<Mat3> shoulder;
  FrameKind kind = FrameKind::Pseudo;
  int frame_index = -1;
  int lr_h = 0, lr_w = 0;
  std::vector<Ray> lr_rays;
  Matrix lr_targets;  // n_pix x 3
  Image hr;

  CameraPose lr_camera;
};

std::vector<TrainFrame> build_train_frames(const std::vector<ExpressionFrame>& frames,
                                           int lr_scale = 4);

// Activations retained by one batched ray forward so the matching backward
// can run. The warp cache is present only on the real-data path.
struct RayForwardCache {
  int n = 0;
  bool warped = false;
  int latent_row = -1;
  std::optional<Mat3> shoulder;
  std::vector<double> raw;  // n x raw_total, post-warp, pre-encoding
  WarpCache warp_cache;
  Matrix reps;
  MlpCache feat_cache;
  Matrix bank;
  Matrix attn_in;
  MlpCache attn_cache;
  Matrix weights;
  Matrix x;
  MlpCache nelf_cache;
};

// Training-path forward for a batch of rays of one frame. use_latent >= 0
// routes the sampled points through the warping network with that latent.
Matrix forward_rays_train(const ModelBundle& bundle, const Vector& e,
                          const std::vector<Ray>& rays,
                          const std::optional<Mat3>& shoulder, int use_latent,
                          RayForwardCache& cache);

void backward_rays_train(ModelBundle& bundle, const RayForwardCache& cache,
                         const Matrix& d_rgb);

// Mean-squared ray loss over the given rays; accumulates parameter grads
// scaled by `grad_scale`.
double ray_loss_and_grad(ModelBundle& bundle, const TrainFrame& frame,
                         const std::vector<int>& ray_idx, bool use_warp,
                         double grad_scale);

// Full image objective: LR render -> SR -> MSE + lambda * perceptual against
// the frame's HR image. The training loss is evaluated on the unclamped SR
// output; clamping happens only when emitting images.
double image_loss_and_grad(ModelBundle& bundle, const TrainFrame& frame, bool use_warp,
                           const LossConfig& loss_cfg,
                           const PerceptualExtractor* extractor, double grad_scale,
                           Tensor3* pred_out = nullptr);

enum class Stage : uint8_t { Stage1 = 1, Stage2 = 2, Finetune = 3 };

// Parameter-name prefixes trained in a stage.
std::vector<std::string> stage_prefixes(Stage stage, ExpressionMode mode);

double stage_base_lr(const RunConfig& cfg, Stage stage);
double lr_at(const RunConfig& cfg, Stage stage, uint64_t stage_iter);

struct Adam {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  uint64_t t = 0;
  std::vector<ParamView> params;
  std::vector<ParamView> grads;
  size_t total = 0;
  Vector m, v;

  static Adam create(ModelBundle& bundle, const std::vector<std::string>& prefixes,
                     const RunConfig& cfg);
  void step(double lr);
};

using LossLog = std::vector<std::pair<uint64_t, double>>;

// Runs `n_iters` iterations of the given stage. Batches are derived purely
// from (seed, stage, stage_iter), so a resumed run continues exactly where
// the interrupted one stopped. Returns the mean loss per logged iteration.
void run_stage(Stage stage, ModelBundle& bundle, Adam& adam,
               const std::vector<TrainFrame>& pseudo,
               const std::vector<TrainFrame>& real, const RunConfig& cfg,
               uint64_t start_stage_iter, uint64_t n_iters,
               const PerceptualExtractor* extractor, LossLog* log);

// Checkpoint container format (little-endian): magic "LAVCK1\0", version
// u16, config hash u64, iteration u64, named parameter groups (name, dims,
// float32 data), then optional optimizer state. Saving commits the in-memory
// state to float32 so that resuming reproduces the continued run exactly.
void save_checkpoint(const std::string& path, ModelBundle& bundle, Adam* adam,
                     uint64_t iteration, uint64_t arch_hash);

struct CheckpointInfo {
  uint64_t iteration = 0;
  bool optimizer_loaded = false;
};

CheckpointInfo load_checkpoint(const std::string& path, ModelBundle& bundle,
                               Adam* adam, uint64_t expected_hash);

// Iteration bookkeeping: stages run back to back on one global counter.
uint64_t stage_start_iteration(const RunConfig& cfg, Stage stage);
uint64_t stage_total_iters(const RunConfig& cfg, Stage stage);

}  // namespace nelf
