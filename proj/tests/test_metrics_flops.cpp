#include <doctest.h>

#include "nelf/flops.hpp"
#include "nelf/metrics.hpp"
#include "test_util.hpp"

using namespace nelf;

TEST_SUITE("metrics_flops") {

TEST_CASE("psnr caps identical images at 99 dB") {
  Image a(8, 8);
  for (auto& v : a.data) v = 0.42f;
  CHECK(psnr(a, a) == 99.0);
}

TEST_CASE("psnr of unit MSE is 0 dB") {
  Image a(4, 4), b(4, 4);
  for (auto& v : a.data) v = 1.0f;
  for (auto& v : b.data) v = 0.0f;
  CHECK(psnr(a, b) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("psnr matches an independent scalar-loop computation") {
  Rng rng(3);
  Image a(6, 5), b(6, 5);
  for (auto& v : a.data) v = static_cast<float>(rng.uniform(0, 1));
  for (auto& v : b.data) v = static_cast<float>(rng.uniform(0, 1));
  double mse = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    mse += d * d;
  }
  mse /= a.data.size();
  const double expect = 10.0 * std::log10(1.0 / mse);
  CHECK(std::abs(psnr(a, b) - expect) < 1e-9);

  Image c(5, 5);
  CHECK_THROWS_AS(psnr(a, c), ValidationError);
}

TEST_CASE("psnr and ssim are symmetric") {
  Rng rng(5);
  Image a(12, 12), b(12, 12);
  for (auto& v : a.data) v = static_cast<float>(rng.uniform(0, 1));
  for (auto& v : b.data) v = static_cast<float>(rng.uniform(0, 1));
  CHECK(std::abs(psnr(a, b) - psnr(b, a)) < 1e-12);
  CHECK(std::abs(ssim(a, b) - ssim(b, a)) < 1e-12);
}

TEST_CASE("ssim of an image with itself is exactly 1") {
  Rng rng(7);
  Image a(16, 16);
  for (auto& v : a.data) v = static_cast<float>(rng.uniform(0, 1));
  CHECK(ssim(a, a) == 1.0);
}

TEST_CASE("constant identical images give ssim 1 despite zero variance") {
  Image a(11, 11), b(11, 11);
  for (auto& v : a.data) v = 0.3f;
  for (auto& v : b.data) v = 0.3f;
  CHECK(ssim(a, b) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("inverted binary pattern scores below 0.5 and matches a direct formula") {
  // Fixed 16x16 checkerboard-of-blocks pattern.
  Image a(16, 16), b(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const float v = ((x / 4 + y / 4) % 2 == 0) ? 1.0f : 0.0f;
      for (int c = 0; c < 3; ++c) {
        a.at(y, x, c) = v;
        b.at(y, x, c) = 1.0f - v;
      }
    }
  const double got = ssim(a, b);
  CHECK(got < 0.5);

  // Direct formula evaluation with an independently constructed window.
  std::vector<double> win(11 * 11);
  double sum = 0;
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 11; ++x) {
      const double dy = y - 5.0, dx = x - 5.0;
      win[y * 11 + x] = std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5));
      sum += win[y * 11 + x];
    }
  for (auto& w : win) w /= sum;
  double total = 0;
  int count = 0;
  for (int ch = 0; ch < 3; ++ch)
    for (int y = 0; y + 11 <= 16; ++y)
      for (int x = 0; x + 11 <= 16; ++x) {
        double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
        for (int wy = 0; wy < 11; ++wy)
          for (int wx = 0; wx < 11; ++wx) {
            const double w = win[wy * 11 + wx];
            const double va = a.at(y + wy, x + wx, ch);
            const double vb = b.at(y + wy, x + wx, ch);
            ma += w * va;
            mb += w * vb;
            aa += w * va * va;
            bb += w * vb * vb;
            ab += w * va * vb;
          }
        const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
        total += ((2 * ma * mb + c1) * (2 * (ab - ma * mb) + c2)) /
                 ((ma * ma + mb * mb + c1) *
                  ((aa - ma * ma) + (bb - mb * mb) + c2));
        ++count;
      }
  CHECK(got == doctest::Approx(total / count).epsilon(1e-12));
}

TEST_CASE("ssim rejects images smaller than the window") {
  Image a(8, 8), b(8, 8);
  CHECK_THROWS_AS(ssim(a, b), ValidationError);
}

TEST_CASE("report aggregates per-frame means") {
  MetricReport r = make_report({{30.0, 0.9, 0.01}, {20.0, 0.7, 0.03}});
  CHECK(r.psnr_mean == doctest::Approx(25.0));
  CHECK(r.ssim_mean == doctest::Approx(0.8));
  CHECK(r.perceptual_mean == doctest::Approx(0.02));
  CHECK(r.to_text().find("psnr_mean=") != std::string::npos);
  CHECK(r.to_csv().find("frame,psnr,ssim,perceptual") != std::string::npos);
}

TEST_CASE("dense counting primitive: 4->2 is 8 MACs") {
  CHECK(macs_dense(4, 2) == 8.0);
  CHECK(macs_conv(3, 8, 3, 16) == 3 * 8 * 9 * 16.0);
  CHECK(macs_tconv(8, 8, 4, 64, 2) == 8 * 8 * 16 * 64.0 / 4);
}

TEST_CASE("desk configuration matches the hand-tabulated per-layer count") {
  // Desk architecture: K=8, pe=4 (include input), d_e=4, bank 16x32,
  // encoder width 64 (2 blocks), NeLF 4 blocks x 64, SR 3 blocks x 24,
  // 64x64 output (16x16 LR).
  RunConfig cfg;  // desk defaults
  FlopsBreakdown bd = flops_per_pixel(cfg.model(), 64, 64);

  // ray rep length: 3*8 scalars * (2*4+1) = 216
  // feature net per frame: 4*64 + 2*(2*64*64) + 64*512 = 49408; /4096 px
  CHECK(bd.feature_mpp == 49408.0 / 4096.0);
  // attention per LR ray: (216+4)*64 + 2*(2*64*64) + 64*16 = 31488; plus
  // the 16x32 bank product (512); /16
  CHECK(bd.attention_mpp == (31488.0 + 512.0) / 16.0);
  // NeLF per LR ray: (216+32)*64 + 4*(2*64*64) + 64*3 = 48832; /16
  CHECK(bd.nelf_mpp == 48832.0 / 16.0);
  // SR per HR pixel: head 3*24*9/16 + body 3*2*24*24*9/16
  //                  + up1 24*24*16/4/4 + up2 24*24*16/4 + proj 24*3*9
  const double sr = 648.0 / 16 + 31104.0 / 16 + 576.0 + 2304.0 + 648.0;
  CHECK(bd.sr_mpp == sr);
  CHECK(bd.total_macs_per_pixel ==
        49408.0 / 4096 + 32000.0 / 16 + 48832.0 / 16 + sr);
  CHECK(bd.total_flops_per_pixel == 2.0 * bd.total_macs_per_pixel);
}

TEST_CASE("paper-scale configuration lands in the acceptance band") {
  FlopsBreakdown bd = flops_per_pixel(paper_scale_model(), 512, 512);
  CHECK(bd.total_macs_per_pixel >= 0.04e6);
  CHECK(bd.total_macs_per_pixel <= 0.12e6);
}

TEST_CASE("flops are a pure function of the architecture") {
  RunConfig cfg;
  auto a = flops_per_pixel(cfg.model(), 64, 64);
  auto b = flops_per_pixel(cfg.model(), 64, 64);
  CHECK(a.total_macs_per_pixel == b.total_macs_per_pixel);
  REQUIRE(a.rows.size() == b.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i)
    CHECK(a.rows[i].macs_per_pixel == b.rows[i].macs_per_pixel);
}

TEST_CASE("moving the SR body after the upsamplers multiplies its cost by 16") {
  RunConfig cfg;
  auto deferred = flops_per_pixel(cfg.model(), 64, 64, false);
  auto early = flops_per_pixel(cfg.model(), 64, 64, true);
  CHECK(early.sr_body_mpp == 16.0 * deferred.sr_body_mpp);
}

TEST_CASE("flops validates the resolution") {
  RunConfig cfg;
  CHECK_THROWS_AS(flops_per_pixel(cfg.model(), 30, 64), ValidationError);
}

}  // TEST_SUITE
