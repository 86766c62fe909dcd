#include "nelf/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace nelf {

double psnr(const Image& a, const Image& b, double max_val) {
  check(a.height == b.height && a.width == b.width && a.channels == b.channels,
        "psnr: image dimensions disagree");
  double mse = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.data.size());
  if (mse == 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(max_val * max_val / mse));
}

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

std::vector<double> gaussian_window() {
  std::vector<double> w(kWin * kWin);
  double sum = 0.0;
  for (int y = 0; y < kWin; ++y) {
    for (int x = 0; x < kWin; ++x) {
      const double dy = y - (kWin - 1) / 2.0;
      const double dx = x - (kWin - 1) / 2.0;
      w[y * kWin + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
      sum += w[y * kWin + x];
    }
  }
  for (double& v : w) v /= sum;
  return w;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  check(a.height == b.height && a.width == b.width && a.channels == b.channels,
        "ssim: image dimensions disagree");
  check(a.height >= kWin && a.width >= kWin, "ssim: image smaller than 11x11 window");
  static const std::vector<double> win = gaussian_window();
  const double c1 = kK1 * kK1;
  const double c2 = kK2 * kK2;

  double total = 0.0;
  int count = 0;
  for (int ch = 0; ch < a.channels; ++ch) {
    for (int y = 0; y + kWin <= a.height; ++y) {
      for (int x = 0; x + kWin <= a.width; ++x) {
        double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
        for (int wy = 0; wy < kWin; ++wy) {
          for (int wx = 0; wx < kWin; ++wx) {
            const double wgt = win[wy * kWin + wx];
            const double va = a.at(y + wy, x + wx, ch);
            const double vb = b.at(y + wy, x + wx, ch);
            mu_a += wgt * va;
            mu_b += wgt * vb;
            aa += wgt * va * va;
            bb += wgt * vb * vb;
            ab += wgt * va * vb;
          }
        }
        const double var_a = aa - mu_a * mu_a;
        const double var_b = bb - mu_b * mu_b;
        const double cov = ab - mu_a * mu_b;
        const double s = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                         ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        total += s;
        ++count;
      }
    }
  }
  return total / count;
}

double perceptual_metric(const PerceptualExtractor& extractor, const Image& a,
                         const Image& b) {
  return perceptual_distance(extractor, to_tensor(a), to_tensor(b));
}

MetricReport make_report(const std::vector<FrameMetrics>& frames) {
  MetricReport r;
  r.frames = frames;
  if (frames.empty()) return r;
  for (const auto& f : frames) {
    r.psnr_mean += f.psnr;
    r.ssim_mean += f.ssim;
    r.perceptual_mean += f.perceptual;
  }
  r.psnr_mean /= frames.size();
  r.ssim_mean /= frames.size();
  r.perceptual_mean /= frames.size();
  return r;
}

std::string MetricReport::to_text() const {
  char buf[128];
  std::ostringstream os;
  std::snprintf(buf, sizeof(buf), "frames=%zu\n", frames.size());
  os << buf;
  std::snprintf(buf, sizeof(buf), "psnr_mean=%.9f\n", psnr_mean);
  os << buf;
  std::snprintf(buf, sizeof(buf), "ssim_mean=%.9f\n", ssim_mean);
  os << buf;
  std::snprintf(buf, sizeof(buf), "perceptual_mean=%.9f\n", perceptual_mean);
  os << buf;
  return os.str();
}

std::string MetricReport::to_csv() const {
  std::ostringstream os;
  os << "frame,psnr,ssim,perceptual\n";
  char buf[160];
  for (size_t i = 0; i < frames.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9f,%.9f,%.9f\n", i, frames[i].psnr,
                  frames[i].ssim, frames[i].perceptual);
    os << buf;
  }
  return os.str();
}

}  // namespace nelf
