#include "nelf/flops.hpp"

#include <cstdio>
#include <sstream>

namespace nelf {

double macs_dense(int in, int out) { return static_cast<double>(in) * out; }

double macs_conv(int in_c, int out_c, int kernel, double pixels) {
  return static_cast<double>(in_c) * out_c * kernel * kernel * pixels;
}

double macs_tconv(int in_c, int out_c, int kernel, double out_pixels, int stride) {
  return static_cast<double>(in_c) * out_c * kernel * kernel * out_pixels /
         (stride * stride);
}

FlopsBreakdown flops_per_pixel(const ModelConfig& cfg, int out_h, int out_w,
                               bool upsample_first) {
  cfg.validate();
  check(out_h >= cfg.sr_scale && out_w >= cfg.sr_scale &&
            out_h % cfg.sr_scale == 0 && out_w % cfg.sr_scale == 0,
        "flops: output resolution must be a positive multiple of the SR scale");
  const double hr_pixels = static_cast<double>(out_h) * out_w;
  const double scale2 = static_cast<double>(cfg.sr_scale) * cfg.sr_scale;
  const double lr_pixels = hr_pixels / scale2;
  const double mid_pixels = hr_pixels / 4.0;  // after the first x2 stage

  FlopsBreakdown bd;
  auto add = [&bd](const std::string& name, double mpp, double& bucket) {
    bd.rows.push_back({name, mpp});
    bucket += mpp;
  };

  const int rep = cfg.rep_dim();
  if (cfg.expression_mode == ExpressionMode::Bank) {
    // Local feature network: once per frame.
    add("feature.head", macs_dense(cfg.d_e, cfg.enc_width) / hr_pixels,
        bd.feature_mpp);
    for (int i = 0; i < cfg.enc_blocks; ++i)
      add("feature.block" + std::to_string(i),
          2.0 * macs_dense(cfg.enc_width, cfg.enc_width) / hr_pixels, bd.feature_mpp);
    add("feature.tail", macs_dense(cfg.enc_width, cfg.n_lf * cfg.d_lf) / hr_pixels,
        bd.feature_mpp);

    // Spatial attention network plus the bank product: once per LR ray.
    add("attention.head", macs_dense(rep + cfg.d_e, cfg.enc_width) / scale2,
        bd.attention_mpp);
    for (int i = 0; i < cfg.enc_blocks; ++i)
      add("attention.block" + std::to_string(i),
          2.0 * macs_dense(cfg.enc_width, cfg.enc_width) / scale2, bd.attention_mpp);
    add("attention.tail", macs_dense(cfg.enc_width, cfg.n_lf) / scale2,
        bd.attention_mpp);
    add("attention.bank_product", macs_dense(cfg.n_lf, cfg.d_lf) / scale2,
        bd.attention_mpp);
  }

  add("nelf.head", macs_dense(cfg.nelf_in_dim(), cfg.nelf_width) / scale2, bd.nelf_mpp);
  for (int i = 0; i < cfg.nelf_blocks; ++i)
    add("nelf.block" + std::to_string(i),
        2.0 * macs_dense(cfg.nelf_width, cfg.nelf_width) / scale2, bd.nelf_mpp);
  add("nelf.tail", macs_dense(cfg.nelf_width, 3) / scale2, bd.nelf_mpp);

  const double body_pixels = upsample_first ? hr_pixels : lr_pixels;
  add("sr.head", macs_conv(3, cfg.sr_width, 3, lr_pixels) / hr_pixels, bd.sr_mpp);
  for (int i = 0; i < cfg.sr_blocks; ++i) {
    const double mpp =
        2.0 * macs_conv(cfg.sr_width, cfg.sr_width, 3, body_pixels) / hr_pixels;
    add("sr.block" + std::to_string(i), mpp, bd.sr_mpp);
    bd.sr_body_mpp += mpp;
  }
  add("sr.up1", macs_tconv(cfg.sr_width, cfg.sr_width, 4, mid_pixels, 2) / hr_pixels,
      bd.sr_mpp);
  add("sr.up2", macs_tconv(cfg.sr_width, cfg.sr_width, 4, hr_pixels, 2) / hr_pixels,
      bd.sr_mpp);
  add("sr.proj", macs_conv(cfg.sr_width, 3, 3, hr_pixels) / hr_pixels, bd.sr_mpp);

  bd.total_macs_per_pixel =
      bd.feature_mpp + bd.attention_mpp + bd.nelf_mpp + bd.sr_mpp;
  bd.total_flops_per_pixel = 2.0 * bd.total_macs_per_pixel;
  return bd;
}

ModelConfig paper_scale_model() {
  ModelConfig m;
  m.d_e = 64;
  m.ray.k_samples = 16;
  m.ray.pe_freqs = 6;
  m.ray.include_input = true;
  m.n_lf = 64;
  m.d_lf = 128;
  m.enc_width = 128;
  m.enc_blocks = 2;
  m.nelf_width = 128;
  m.nelf_blocks = 10;
  m.sr_width = 56;
  m.sr_blocks = 5;
  return m;
}

std::string FlopsBreakdown::to_text() const {
  std::ostringstream os;
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s=%.6f\n", r.name.c_str(), r.macs_per_pixel);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "feature_macs_per_pixel=%.6f\n", feature_mpp);
  os << buf;
  std::snprintf(buf, sizeof(buf), "attention_macs_per_pixel=%.6f\n", attention_mpp);
  os << buf;
  std::snprintf(buf, sizeof(buf), "nelf_macs_per_pixel=%.6f\n", nelf_mpp);
  os << buf;
  std::snprintf(buf, sizeof(buf), "sr_macs_per_pixel=%.6f\n", sr_mpp);
  os << buf;
  std::snprintf(buf, sizeof(buf), "total_macs_per_pixel=%.6f\n", total_macs_per_pixel);
  os << buf;
  std::snprintf(buf, sizeof(buf), "total_flops_per_pixel=%.6f\n", total_flops_per_pixel);
  os << buf;
  return os.str();
}

std::string FlopsBreakdown::to_csv() const {
  std::ostringstream os;
  os << "layer,macs_per_pixel\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f\n", r.name.c_str(), r.macs_per_pixel);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "total,%.6f\n", total_macs_per_pixel);
  os << buf;
  return os.str();
}

}  // namespace nelf
