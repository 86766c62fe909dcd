#pragma once

#include <string>
#include <vector>

#include "nelf/image.hpp"
#include "nelf/loss.hpp"

namespace nelf {

// 10*log10(max^2 / MSE), capped at 99 dB for identical images.
double psnr(const Image& a, const Image& b, double max_val = 1.0);

// Standard SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// valid-region mean over channels. Images must be at least 11x11.
double ssim(const Image& a, const Image& b);

double perceptual_metric(const PerceptualExtractor& extractor, const Image& a,
                         const Image& b);

struct FrameMetrics {
  double psnr = 0.0;
  double ssim = 0.0;
  double perceptual = 0.0;
};

struct MetricReport {
  std::vector<FrameMetrics> frames;
  double psnr_mean = 0.0;
  double ssim_mean = 0.0;
  double perceptual_mean = 0.0;

  // key=value lines / one CSV row per frame.
  std::string to_text() const;
  std::string to_csv() const;
};

MetricReport make_report(const std::vector<FrameMetrics>& frames);

}  // namespace nelf
