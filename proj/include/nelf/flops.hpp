#pragma once

#include <string>
#include <vector>

#include "nelf/renderer.hpp"

namespace nelf {

// Closed-form MAC counts (FLOPs = 2 * MACs). Biases and activations are not
// multiplies and are excluded.
double macs_dense(int in, int out);
double macs_conv(int in_c, int out_c, int kernel, double pixels);
// Transposed conv counted at output resolution divided by stride^2.
double macs_tconv(int in_c, int out_c, int kernel, double out_pixels, int stride);

struct LayerCost {
  std::string name;
  double macs_per_pixel = 0.0;  // per rendered HR pixel
};

struct FlopsBreakdown {
  std::vector<LayerCost> rows;
  double feature_mpp = 0.0;    // local feature network, amortized per frame
  double attention_mpp = 0.0;  // per LR ray / scale^2
  double nelf_mpp = 0.0;       // per LR ray / scale^2
  double sr_mpp = 0.0;
  double sr_body_mpp = 0.0;
  double total_macs_per_pixel = 0.0;
  double total_flops_per_pixel = 0.0;  // 2 * MACs

  std::string to_text() const;
  std::string to_csv() const;
};

// Analytic per-HR-pixel cost of one rendered frame. NeLF-side work happens
// once per LR ray and is divided by scale^2; the local feature network runs
// once per frame and is amortized over all HR pixels. `upsample_first`
// counts a hypothetical SR body placed after the upsamplers (at HR
// resolution) to quantify the deferred-upsampling saving.
FlopsBreakdown flops_per_pixel(const ModelConfig& cfg, int out_h, int out_w,
                               bool upsample_first = false);

// Architecture matching the published full-scale model (NeLF 10 blocks x
// width 128, SR 5 blocks x width 56, 64x128 bank, 512x512 output).
ModelConfig paper_scale_model();

}  // namespace nelf
