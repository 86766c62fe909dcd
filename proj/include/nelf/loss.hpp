#pragma once

#include "nelf/conv.hpp"
#include "nelf/rng.hpp"

namespace nelf {

// Fixed (non-trainable) strided conv pyramid standing in for a pretrained
// perceptual backbone. Identical seed -> identical features; the extractor is
// pluggable behind perceptual_features / perceptual_distance.
class PerceptualExtractor {
public:
  static constexpr int kStages = 3;

  explicit PerceptualExtractor(uint64_t seed = 77);

  // Post-activation features; spatial dims halve per stage.
  std::vector<Tensor3> features(const Tensor3& img) const;

  struct Cache {
    std::vector<Tensor3> inputs;  // input to each stage
    std::vector<Tensor3> z;       // pre-activations
  };
  std::vector<Tensor3> features(const Tensor3& img, Cache& cache) const;

  // Gradient w.r.t. the input image only (the weights are frozen).
  Tensor3 backward_input(const Cache& cache, const std::vector<Tensor3>& d_feats) const;

  uint64_t seed() const { return seed_; }

private:
  uint64_t seed_;
  std::vector<Conv2d> stages_;
};

// Mean over stages of the per-stage mean squared feature difference.
double perceptual_distance(const PerceptualExtractor& extractor, const Tensor3& a,
                           const Tensor3& b);

struct LossConfig {
  double lambda = 0.005;  // perceptual weight

  void validate() const { check(lambda >= 0.0, "loss: lambda must be >= 0"); }
};

// Eq-style photometric objective: mean squared error over all elements plus
// lambda times the perceptual distance. lambda = 0 recovers pure MSE exactly
// (the extractor is never evaluated).
double photometric_perceptual_loss(const Tensor3& pred, const Tensor3& target,
                                   const LossConfig& cfg,
                                   const PerceptualExtractor* extractor);

// Same value, plus the gradient w.r.t. pred.
double photometric_perceptual_loss_grad(const Tensor3& pred, const Tensor3& target,
                                        const LossConfig& cfg,
                                        const PerceptualExtractor* extractor,
                                        Tensor3& d_pred);

}  // namespace nelf
