#include "nelf/conv.hpp"

#include <cmath>

namespace nelf {

void Tensor3::apply_leaky_relu() {
  for (double& x : v)
    if (x < 0.0) x *= kLeakySlope;
}

Tensor3 leaky_relu(const Tensor3& z) {
  Tensor3 a = z;
  a.apply_leaky_relu();
  return a;
}

Tensor3 leaky_relu_backward(const Tensor3& z, const Tensor3& da) {
  Tensor3 dz = da;
  for (size_t i = 0; i < z.v.size(); ++i)
    if (z.v[i] <= 0.0) dz.v[i] *= kLeakySlope;
  return dz;
}

void Conv2d::init(int in, int out, int kernel, int stride_, int pad_, Rng& rng) {
  in_c = in;
  out_c = out;
  k = kernel;
  stride = stride_;
  pad = pad_;
  w.assign(size_t(out) * in * k * k, 0.0);
  const double stddev = std::sqrt(2.0 / (in * k * k));
  for (double& x : w) x = rng.normal(0.0, stddev);
  b = Vector::Zero(out);
  gw.assign(w.size(), 0.0);
  gb = Vector::Zero(out);
}

namespace {

// Valid output range [o_lo, o_hi) for one kernel offset: 0 <= o*stride - pad
// + koff < extent.
inline void tap_range(int koff, int pad, int stride, int in_extent, int out_extent,
                      int& o_lo, int& o_hi) {
  o_lo = 0;
  while (o_lo * stride - pad + koff < 0) ++o_lo;
  o_hi = out_extent;
  while (o_hi > o_lo && (o_hi - 1) * stride - pad + koff >= in_extent) --o_hi;
}

}  // namespace

// Kernel-decomposed loops: one shifted multiply-accumulate sweep per
// (channel pair, tap), contiguous in x so the compiler can vectorize.
Tensor3 Conv2d::forward(const Tensor3& x) const {
  Tensor3 y(out_c, out_h(x.h), out_w(x.w));
  for (int oc = 0; oc < out_c; ++oc) {
    double* yp = &y.v[size_t(oc) * y.h * y.w];
    const double bias = b(oc);
    for (int i = 0; i < y.h * y.w; ++i) yp[i] = bias;
    for (int ic = 0; ic < in_c; ++ic) {
      const double* xp = &x.v[size_t(ic) * x.h * x.w];
      for (int ky = 0; ky < k; ++ky) {
        int oy_lo, oy_hi;
        tap_range(ky, pad, stride, x.h, y.h, oy_lo, oy_hi);
        for (int kx = 0; kx < k; ++kx) {
          const double w_tap = wt(oc, ic, ky, kx);
          if (w_tap == 0.0) continue;
          int ox_lo, ox_hi;
          tap_range(kx, pad, stride, x.w, y.w, ox_lo, ox_hi);
          for (int oy = oy_lo; oy < oy_hi; ++oy) {
            double* yrow = yp + size_t(oy) * y.w;
            const double* xrow = xp + size_t(oy * stride - pad + ky) * x.w - pad + kx;
            if (stride == 1) {
              for (int ox = ox_lo; ox < ox_hi; ++ox) yrow[ox] += w_tap * xrow[ox];
            } else {
              for (int ox = ox_lo; ox < ox_hi; ++ox)
                yrow[ox] += w_tap * xrow[ox * stride];
            }
          }
        }
      }
    }
  }
  return y;
}

void Conv2d::backward(const Tensor3& x, const Tensor3& dy, Tensor3* dx) {
  if (dx) *dx = Tensor3(in_c, x.h, x.w);
  for (int oc = 0; oc < out_c; ++oc) {
    const double* gp = &dy.v[size_t(oc) * dy.h * dy.w];
    double acc_b = 0.0;
    for (int i = 0; i < dy.h * dy.w; ++i) acc_b += gp[i];
    gb(oc) += acc_b;
    for (int ic = 0; ic < in_c; ++ic) {
      const double* xp = &x.v[size_t(ic) * x.h * x.w];
      double* dxp = dx ? &dx->v[size_t(ic) * x.h * x.w] : nullptr;
      for (int ky = 0; ky < k; ++ky) {
        int oy_lo, oy_hi;
        tap_range(ky, pad, stride, x.h, dy.h, oy_lo, oy_hi);
        for (int kx = 0; kx < k; ++kx) {
          int ox_lo, ox_hi;
          tap_range(kx, pad, stride, x.w, dy.w, ox_lo, ox_hi);
          const double w_tap = wt(oc, ic, ky, kx);
          double acc_w = 0.0;
          for (int oy = oy_lo; oy < oy_hi; ++oy) {
            const double* grow = gp + size_t(oy) * dy.w;
            const size_t xbase = size_t(oy * stride - pad + ky) * x.w - pad + kx;
            const double* xrow = xp + xbase;
            double* dxrow = dxp ? dxp + xbase : nullptr;
            if (stride == 1) {
              for (int ox = ox_lo; ox < ox_hi; ++ox) acc_w += grow[ox] * xrow[ox];
              if (dxrow)
                for (int ox = ox_lo; ox < ox_hi; ++ox) dxrow[ox] += w_tap * grow[ox];
            } else {
              for (int ox = ox_lo; ox < ox_hi; ++ox)
                acc_w += grow[ox] * xrow[ox * stride];
              if (dxrow)
                for (int ox = ox_lo; ox < ox_hi; ++ox)
                  dxrow[ox * stride] += w_tap * grow[ox];
            }
          }
          gw[((size_t(oc) * in_c + ic) * k + ky) * k + kx] += acc_w;
        }
      }
    }
  }
}

Tensor3 Conv2d::backward_input(const Tensor3& dy, int in_h, int in_w) const {
  Tensor3 dx(in_c, in_h, in_w);
  for (int oc = 0; oc < out_c; ++oc) {
    const double* gp = &dy.v[size_t(oc) * dy.h * dy.w];
    for (int ic = 0; ic < in_c; ++ic) {
      double* dxp = &dx.v[size_t(ic) * in_h * in_w];
      for (int ky = 0; ky < k; ++ky) {
        int oy_lo, oy_hi;
        tap_range(ky, pad, stride, in_h, dy.h, oy_lo, oy_hi);
        for (int kx = 0; kx < k; ++kx) {
          int ox_lo, ox_hi;
          tap_range(kx, pad, stride, in_w, dy.w, ox_lo, ox_hi);
          const double w_tap = wt(oc, ic, ky, kx);
          if (w_tap == 0.0) continue;
          for (int oy = oy_lo; oy < oy_hi; ++oy) {
            const double* grow = gp + size_t(oy) * dy.w;
            double* dxrow = dxp + size_t(oy * stride - pad + ky) * in_w - pad + kx;
            if (stride == 1) {
              for (int ox = ox_lo; ox < ox_hi; ++ox) dxrow[ox] += w_tap * grow[ox];
            } else {
              for (int ox = ox_lo; ox < ox_hi; ++ox)
                dxrow[ox * stride] += w_tap * grow[ox];
            }
          }
        }
      }
    }
  }
  return dx;
}

void Conv2d::zero_grad() {
  std::fill(gw.begin(), gw.end(), 0.0);
  gb.setZero();
}

void Conv2d::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn({prefix + ".w", w.data(), w.size(), {out_c, in_c, k, k}});
  fn({prefix + ".b", b.data(), static_cast<size_t>(b.size()), {out_c}});
}

void Conv2d::visit_grads(const std::string& prefix, const ParamVisitor& fn) {
  fn({prefix + ".w", gw.data(), gw.size(), {out_c, in_c, k, k}});
  fn({prefix + ".b", gb.data(), static_cast<size_t>(gb.size()), {out_c}});
}

void TConv2d::init(int in, int out, Rng& rng) {
  in_c = in;
  out_c = out;
  w.assign(size_t(in) * out * k * k, 0.0);
  const double stddev = std::sqrt(2.0 / (in * k * k / (stride * stride)));
  for (double& x : w) x = rng.normal(0.0, stddev);
  b = Vector::Zero(out);
  gw.assign(w.size(), 0.0);
  gb = Vector::Zero(out);
}

Tensor3 TConv2d::forward(const Tensor3& x) const {
  // out = (in - 1) * stride - 2 * pad + k; with k=4, s=2, p=1 this is 2*in.
  Tensor3 y(out_c, (x.h - 1) * stride - 2 * pad + k, (x.w - 1) * stride - 2 * pad + k);
  for (int oc = 0; oc < out_c; ++oc) {
    double* yp = &y.v[size_t(oc) * y.h * y.w];
    const double bias = b(oc);
    for (int i = 0; i < y.h * y.w; ++i) yp[i] = bias;
    for (int ic = 0; ic < in_c; ++ic) {
      const double* xp = &x.v[size_t(ic) * x.h * x.w];
      for (int ky = 0; ky < k; ++ky) {
        int iy_lo, iy_hi;
        tap_range(ky, pad, stride, y.h, x.h, iy_lo, iy_hi);
        for (int kx = 0; kx < k; ++kx) {
          int ix_lo, ix_hi;
          tap_range(kx, pad, stride, y.w, x.w, ix_lo, ix_hi);
          const double w_tap = wt(ic, oc, ky, kx);
          if (w_tap == 0.0) continue;
          for (int iy = iy_lo; iy < iy_hi; ++iy) {
            const double* xrow = xp + size_t(iy) * x.w;
            double* yrow = yp + size_t(iy * stride - pad + ky) * y.w - pad + kx;
            for (int ix = ix_lo; ix < ix_hi; ++ix)
              yrow[ix * stride] += w_tap * xrow[ix];
          }
        }
      }
    }
  }
  return y;
}

void TConv2d::backward(const Tensor3& x, const Tensor3& dy, Tensor3* dx) {
  if (dx) *dx = Tensor3(in_c, x.h, x.w);
  for (int oc = 0; oc < out_c; ++oc) {
    const double* gp = &dy.v[size_t(oc) * dy.h * dy.w];
    double acc_b = 0.0;
    for (int i = 0; i < dy.h * dy.w; ++i) acc_b += gp[i];
    gb(oc) += acc_b;
    for (int ic = 0; ic < in_c; ++ic) {
      const double* xp = &x.v[size_t(ic) * x.h * x.w];
      double* dxp = dx ? &dx->v[size_t(ic) * x.h * x.w] : nullptr;
      for (int ky = 0; ky < k; ++ky) {
        int iy_lo, iy_hi;
        tap_range(ky, pad, stride, dy.h, x.h, iy_lo, iy_hi);
        for (int kx = 0; kx < k; ++kx) {
          int ix_lo, ix_hi;
          tap_range(kx, pad, stride, dy.w, x.w, ix_lo, ix_hi);
          const double w_tap = wt(ic, oc, ky, kx);
          double acc_w = 0.0;
          for (int iy = iy_lo; iy < iy_hi; ++iy) {
            const double* xrow = xp + size_t(iy) * x.w;
            const double* grow = gp + size_t(iy * stride - pad + ky) * dy.w - pad + kx;
            double* dxrow = dxp ? dxp + size_t(iy) * x.w : nullptr;
            for (int ix = ix_lo; ix < ix_hi; ++ix)
              acc_w += xrow[ix] * grow[ix * stride];
            if (dxrow)
              for (int ix = ix_lo; ix < ix_hi; ++ix)
                dxrow[ix] += w_tap * grow[ix * stride];
          }
          gw[((size_t(ic) * out_c + oc) * k + ky) * k + kx] += acc_w;
        }
      }
    }
  }
}

void TConv2d::zero_grad() {
  std::fill(gw.begin(), gw.end(), 0.0);
  gb.setZero();
}

void TConv2d::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn({prefix + ".w", w.data(), w.size(), {in_c, out_c, k, k}});
  fn({prefix + ".b", b.data(), static_cast<size_t>(b.size()), {out_c}});
}

void TConv2d::visit_grads(const std::string& prefix, const ParamVisitor& fn) {
  fn({prefix + ".w", gw.data(), gw.size(), {in_c, out_c, k, k}});
  fn({prefix + ".b", gb.data(), static_cast<size_t>(gb.size()), {out_c}});
}

void ConvResBlock::init(int ch, Rng& rng) {
  conv1.init(ch, ch, 3, 1, 1, rng);
  conv2.init(ch, ch, 3, 1, 1, rng);
}

Tensor3 ConvResBlock::forward(const Tensor3& x) const {
  Tensor3 a1 = leaky_relu(conv1.forward(x));
  Tensor3 a2 = leaky_relu(conv2.forward(a1));
  Tensor3 y = x;
  for (size_t i = 0; i < y.v.size(); ++i) y.v[i] += a2.v[i];
  return y;
}

Tensor3 ConvResBlock::forward(const Tensor3& x, ConvBlockCache& cache) const {
  cache.x = x;
  cache.z1 = conv1.forward(x);
  cache.a1 = leaky_relu(cache.z1);
  cache.z2 = conv2.forward(cache.a1);
  Tensor3 a2 = leaky_relu(cache.z2);
  Tensor3 y = x;
  for (size_t i = 0; i < y.v.size(); ++i) y.v[i] += a2.v[i];
  return y;
}

Tensor3 ConvResBlock::backward(const ConvBlockCache& cache, const Tensor3& dy) {
  Tensor3 dz2 = leaky_relu_backward(cache.z2, dy);
  Tensor3 da1;
  conv2.backward(cache.a1, dz2, &da1);
  Tensor3 dz1 = leaky_relu_backward(cache.z1, da1);
  Tensor3 dx;
  conv1.backward(cache.x, dz1, &dx);
  for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dy.v[i];
  return dx;
}

void ConvResBlock::zero_grad() {
  conv1.zero_grad();
  conv2.zero_grad();
}

void ConvResBlock::visit(const std::string& prefix, const ParamVisitor& fn) {
  conv1.visit(prefix + ".c0", fn);
  conv2.visit(prefix + ".c1", fn);
}

void ConvResBlock::visit_grads(const std::string& prefix, const ParamVisitor& fn) {
  conv1.visit_grads(prefix + ".c0", fn);
  conv2.visit_grads(prefix + ".c1", fn);
}

void SrNet::init(int width, int n_blocks, Rng& rng) {
  head.init(3, width, 3, 1, 1, rng);
  body.assign(static_cast<size_t>(n_blocks), {});
  for (auto& blk : body) blk.init(width, rng);
  up1.init(width, width, rng);
  up2.init(width, width, rng);
  proj.init(width, 3, 3, 1, 1, rng);
}

Tensor3 SrNet::forward(const Tensor3& lr) const {
  Tensor3 a0 = leaky_relu(head.forward(lr));
  Tensor3 h = a0;
  for (const auto& blk : body) h = blk.forward(h);
  for (size_t i = 0; i < h.v.size(); ++i) h.v[i] += a0.v[i];
  Tensor3 u1 = leaky_relu(up1.forward(h));
  Tensor3 u2 = leaky_relu(up2.forward(u1));
  counters().sr_evals.fetch_add(1, std::memory_order_relaxed);
  return proj.forward(u2);
}

Tensor3 SrNet::forward(const Tensor3& lr, SrCache& cache) const {
  cache.x = lr;
  cache.z_head = head.forward(lr);
  cache.a_head = leaky_relu(cache.z_head);
  cache.blocks.resize(body.size());
  Tensor3 h = cache.a_head;
  for (size_t i = 0; i < body.size(); ++i) h = body[i].forward(h, cache.blocks[i]);
  for (size_t i = 0; i < h.v.size(); ++i) h.v[i] += cache.a_head.v[i];
  cache.tail_in = h;
  cache.z_up1 = up1.forward(h);
  cache.a_up1 = leaky_relu(cache.z_up1);
  cache.z_up2 = up2.forward(cache.a_up1);
  cache.a_up2 = leaky_relu(cache.z_up2);
  counters().sr_evals.fetch_add(1, std::memory_order_relaxed);
  return proj.forward(cache.a_up2);
}

Tensor3 SrNet::backward(const SrCache& cache, const Tensor3& dy) {
  Tensor3 da_up2;
  proj.backward(cache.a_up2, dy, &da_up2);
  Tensor3 dz_up2 = leaky_relu_backward(cache.z_up2, da_up2);
  Tensor3 da_up1;
  up2.backward(cache.a_up1, dz_up2, &da_up1);
  Tensor3 dz_up1 = leaky_relu_backward(cache.z_up1, da_up1);
  Tensor3 dh;
  up1.backward(cache.tail_in, dz_up1, &dh);
  Tensor3 da0_skip = dh;
  for (int i = static_cast<int>(body.size()) - 1; i >= 0; --i)
    dh = body[i].backward(cache.blocks[i], dh);
  for (size_t i = 0; i < dh.v.size(); ++i) dh.v[i] += da0_skip.v[i];
  Tensor3 dz_head = leaky_relu_backward(cache.z_head, dh);
  Tensor3 dx;
  head.backward(cache.x, dz_head, &dx);
  return dx;
}

void SrNet::zero_grad() {
  head.zero_grad();
  for (auto& blk : body) blk.zero_grad();
  up1.zero_grad();
  up2.zero_grad();
  proj.zero_grad();
}

void SrNet::visit(const std::string& prefix, const ParamVisitor& fn) {
  head.visit(prefix + ".head", fn);
  for (size_t i = 0; i < body.size(); ++i)
    body[i].visit(prefix + ".b" + std::to_string(i), fn);
  up1.visit(prefix + ".up1", fn);
  up2.visit(prefix + ".up2", fn);
  proj.visit(prefix + ".proj", fn);
}

void SrNet::visit_grads(const std::string& prefix, const ParamVisitor& fn) {
  head.visit_grads(prefix + ".head", fn);
  for (size_t i = 0; i < body.size(); ++i)
    body[i].visit_grads(prefix + ".b" + std::to_string(i), fn);
  up1.visit_grads(prefix + ".up1", fn);
  up2.visit_grads(prefix + ".up2", fn);
  proj.visit_grads(prefix + ".proj", fn);
}

}  // namespace nelf
