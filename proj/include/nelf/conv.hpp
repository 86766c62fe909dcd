#pragma once

#include <array>
#include <string>
#include <vector>

#include "nelf/net.hpp"

namespace nelf {

// Planar CHW image/feature map, double precision.
struct Tensor3 {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor3() = default;
  Tensor3(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(size_t(c_) * h_ * w_, 0.0) {}

  double& at(int ci, int y, int x) { return v[(size_t(ci) * h + y) * w + x]; }
  double at(int ci, int y, int x) const { return v[(size_t(ci) * h + y) * w + x]; }
  size_t size() const { return v.size(); }

  void apply_leaky_relu();
};

Tensor3 leaky_relu(const Tensor3& z);
Tensor3 leaky_relu_backward(const Tensor3& z, const Tensor3& da);

struct Conv2d {
  int in_c = 0, out_c = 0, k = 3, stride = 1, pad = 1;
  std::vector<double> w;  // [out][in][k][k]
  Vector b;
  std::vector<double> gw;
  Vector gb;

  void init(int in, int out, int kernel, int stride_, int pad_, Rng& rng);

  int out_h(int h) const { return (h + 2 * pad - k) / stride + 1; }
  int out_w(int w_) const { return (w_ + 2 * pad - k) / stride + 1; }

  Tensor3 forward(const Tensor3& x) const;
  // Accumulates gw/gb; fills dx when non-null.
  void backward(const Tensor3& x, const Tensor3& dy, Tensor3* dx);
  // Input gradient only (frozen weights).
  Tensor3 backward_input(const Tensor3& dy, int in_h, int in_w) const;

  void zero_grad();
  void visit(const std::string& prefix, const ParamVisitor& fn);
  void visit_grads(const std::string& prefix, const ParamVisitor& fn);

  double& wt(int oc, int ic, int ky, int kx) {
    return w[((size_t(oc) * in_c + ic) * k + ky) * k + kx];
  }
  double wt(int oc, int ic, int ky, int kx) const {
    return w[((size_t(oc) * in_c + ic) * k + ky) * k + kx];
  }
};

// Transposed convolution, kernel 4, stride 2, pad 1: exact x2 upsampling.
struct TConv2d {
  int in_c = 0, out_c = 0, k = 4, stride = 2, pad = 1;
  std::vector<double> w;  // [in][out][k][k]
  Vector b;
  std::vector<double> gw;
  Vector gb;

  void init(int in, int out, Rng& rng);

  Tensor3 forward(const Tensor3& x) const;
  void backward(const Tensor3& x, const Tensor3& dy, Tensor3* dx);

  void zero_grad();
  void visit(const std::string& prefix, const ParamVisitor& fn);
  void visit_grads(const std::string& prefix, const ParamVisitor& fn);

  double& wt(int ic, int oc, int ky, int kx) {
    return w[((size_t(ic) * out_c + oc) * k + ky) * k + kx];
  }
  double wt(int ic, int oc, int ky, int kx) const {
    return w[((size_t(ic) * out_c + oc) * k + ky) * k + kx];
  }
};

struct ConvBlockCache {
  Tensor3 x, z1, a1, z2;
};

// x + LeakyReLU(conv2(LeakyReLU(conv1(x))))
struct ConvResBlock {
  Conv2d conv1, conv2;

  void init(int ch, Rng& rng);
  Tensor3 forward(const Tensor3& x) const;
  Tensor3 forward(const Tensor3& x, ConvBlockCache& cache) const;
  Tensor3 backward(const ConvBlockCache& cache, const Tensor3& dy);

  void zero_grad();
  void visit(const std::string& prefix, const ParamVisitor& fn);
  void visit_grads(const std::string& prefix, const ParamVisitor& fn);
};

struct SrCache {
  Tensor3 x, z_head, a_head;
  std::vector<ConvBlockCache> blocks;
  Tensor3 tail_in;
  Tensor3 z_up1, a_up1, z_up2, a_up2;
};

// Conv head -> residual conv body at LR resolution -> long skip -> two x2
// transposed-conv upsamplers -> conv projection to RGB. Total scale x4; the
// body never sees an upsampled feature map.
struct SrNet {
  Conv2d head;
  std::vector<ConvResBlock> body;
  TConv2d up1, up2;
  Conv2d proj;

  void init(int width, int n_blocks, Rng& rng);

  Tensor3 forward(const Tensor3& lr) const;
  Tensor3 forward(const Tensor3& lr, SrCache& cache) const;
  Tensor3 backward(const SrCache& cache, const Tensor3& dy);

  void zero_grad();
  void visit(const std::string& prefix, const ParamVisitor& fn);
  void visit_grads(const std::string& prefix, const ParamVisitor& fn);
};

}  // namespace nelf
