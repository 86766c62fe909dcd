#include "nelf/loss.hpp"

namespace nelf {

PerceptualExtractor::PerceptualExtractor(uint64_t seed) : seed_(seed) {
  Rng rng = Rng::with_tag(seed, 0x9e9c);
  const int chans[kStages + 1] = {3, 8, 16, 32};
  stages_.resize(kStages);
  for (int s = 0; s < kStages; ++s)
    stages_[s].init(chans[s], chans[s + 1], 3, /*stride=*/2, /*pad=*/1, rng);
}

std::vector<Tensor3> PerceptualExtractor::features(const Tensor3& img) const {
  std::vector<Tensor3> out(kStages);
  Tensor3 x = img;
  for (int s = 0; s < kStages; ++s) {
    out[s] = leaky_relu(stages_[s].forward(x));
    x = out[s];
  }
  return out;
}

std::vector<Tensor3> PerceptualExtractor::features(const Tensor3& img,
                                                   Cache& cache) const {
  std::vector<Tensor3> out(kStages);
  cache.inputs.resize(kStages);
  cache.z.resize(kStages);
  Tensor3 x = img;
  for (int s = 0; s < kStages; ++s) {
    cache.inputs[s] = x;
    cache.z[s] = stages_[s].forward(x);
    out[s] = leaky_relu(cache.z[s]);
    x = out[s];
  }
  return out;
}

Tensor3 PerceptualExtractor::backward_input(const Cache& cache,
                                            const std::vector<Tensor3>& d_feats) const {
  Tensor3 da;  // gradient flowing into the activation of the current stage
  for (int s = kStages - 1; s >= 0; --s) {
    if (da.size() == 0) {
      da = d_feats[s];
    } else {
      for (size_t i = 0; i < da.v.size(); ++i) da.v[i] += d_feats[s].v[i];
    }
    Tensor3 dz = leaky_relu_backward(cache.z[s], da);
    da = stages_[s].backward_input(dz, cache.inputs[s].h, cache.inputs[s].w);
  }
  return da;
}

double perceptual_distance(const PerceptualExtractor& extractor, const Tensor3& a,
                           const Tensor3& b) {
  check(a.c == b.c && a.h == b.h && a.w == b.w,
        "perceptual_distance: shape mismatch");
  const auto fa = extractor.features(a);
  const auto fb = extractor.features(b);
  double total = 0.0;
  for (int s = 0; s < PerceptualExtractor::kStages; ++s) {
    double acc = 0.0;
    for (size_t i = 0; i < fa[s].v.size(); ++i) {
      const double d = fa[s].v[i] - fb[s].v[i];
      acc += d * d;
    }
    total += acc / static_cast<double>(fa[s].v.size());
  }
  return total / PerceptualExtractor::kStages;
}

double photometric_perceptual_loss(const Tensor3& pred, const Tensor3& target,
                                   const LossConfig& cfg,
                                   const PerceptualExtractor* extractor) {
  cfg.validate();
  check(pred.c == target.c && pred.h == target.h && pred.w == target.w,
        "loss: prediction/target shape mismatch");
  double mse = 0.0;
  for (size_t i = 0; i < pred.v.size(); ++i) {
    const double d = pred.v[i] - target.v[i];
    mse += d * d;
  }
  mse /= static_cast<double>(pred.v.size());
  if (cfg.lambda == 0.0) return mse;
  check(extractor != nullptr, "loss: perceptual extractor required when lambda > 0");
  return mse + cfg.lambda * perceptual_distance(*extractor, pred, target);
}

double photometric_perceptual_loss_grad(const Tensor3& pred, const Tensor3& target,
                                        const LossConfig& cfg,
                                        const PerceptualExtractor* extractor,
                                        Tensor3& d_pred) {
  cfg.validate();
  check(pred.c == target.c && pred.h == target.h && pred.w == target.w,
        "loss: prediction/target shape mismatch");
  d_pred = Tensor3(pred.c, pred.h, pred.w);
  double mse = 0.0;
  const double inv_n = 1.0 / static_cast<double>(pred.v.size());
  for (size_t i = 0; i < pred.v.size(); ++i) {
    const double d = pred.v[i] - target.v[i];
    mse += d * d;
    d_pred.v[i] = 2.0 * d * inv_n;
  }
  mse *= inv_n;
  if (cfg.lambda == 0.0) return mse;
  check(extractor != nullptr, "loss: perceptual extractor required when lambda > 0");

  PerceptualExtractor::Cache cache;
  const auto fp = extractor->features(pred, cache);
  const auto ft = extractor->features(target);
  double perc = 0.0;
  std::vector<Tensor3> d_feats(PerceptualExtractor::kStages);
  const double stage_w = cfg.lambda / PerceptualExtractor::kStages;
  for (int s = 0; s < PerceptualExtractor::kStages; ++s) {
    const double inv_m = 1.0 / static_cast<double>(fp[s].v.size());
    d_feats[s] = Tensor3(fp[s].c, fp[s].h, fp[s].w);
    double acc = 0.0;
    for (size_t i = 0; i < fp[s].v.size(); ++i) {
      const double d = fp[s].v[i] - ft[s].v[i];
      acc += d * d;
      d_feats[s].v[i] = stage_w * 2.0 * d * inv_m;
    }
    perc += acc * inv_m;
  }
  Tensor3 d_perc = extractor->backward_input(cache, d_feats);
  for (size_t i = 0; i < d_pred.v.size(); ++i) d_pred.v[i] += d_perc.v[i];
  return mse + cfg.lambda * perc / PerceptualExtractor::kStages;
}

}  // namespace nelf
