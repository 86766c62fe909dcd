#include "nelf/net.hpp"

#include <cmath>

namespace nelf {

Matrix apply_act(const Matrix& z, Act act) {
  switch (act) {
    case Act::None:
      return z;
    case Act::LeakyRelu:
      return z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
    case Act::Sigmoid:
      return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  }
  return z;
}

Matrix act_backward(const Matrix& z, const Matrix& da, Act act) {
  switch (act) {
    case Act::None:
      return da;
    case Act::LeakyRelu:
      return da.cwiseProduct(
          z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; }));
    case Act::Sigmoid:
      return da.cwiseProduct(z.unaryExpr([](double v) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 - s);
      }));
  }
  return da;
}

void Dense::init(int in, int out, Rng& rng, double gain) {
  w.resize(out, in);
  const double stddev = gain * std::sqrt(2.0 / in);
  for (int r = 0; r < out; ++r)
    for (int c = 0; c < in; ++c) w(r, c) = rng.normal(0.0, stddev);
  b = Vector::Zero(out);
  gw = Matrix::Zero(out, in);
  gb = Vector::Zero(out);
}

void Dense::init_zero(int in, int out) {
  w = Matrix::Zero(out, in);
  b = Vector::Zero(out);
  gw = Matrix::Zero(out, in);
  gb = Vector::Zero(out);
}

Matrix Dense::forward(const Matrix& x) const {
  return (x * w.transpose()).rowwise() + b.transpose();
}

Matrix Dense::backward(const Matrix& x, const Matrix& dy) {
  gw.noalias() += dy.transpose() * x;
  gb.noalias() += dy.colwise().sum().transpose();
  return dy * w;
}

void Dense::zero_grad() {
  gw.setZero();
  gb.setZero();
}

void Dense::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn({prefix + ".w", w.data(), static_cast<size_t>(w.size()),
      {static_cast<int>(w.rows()), static_cast<int>(w.cols())}});
  fn({prefix + ".b", b.data(), static_cast<size_t>(b.size()),
      {static_cast<int>(b.size())}});
}

void Dense::visit_grads(const std::string& prefix, const ParamVisitor& fn) {
  fn({prefix + ".w", gw.data(), static_cast<size_t>(gw.size()),
      {static_cast<int>(gw.rows()), static_cast<int>(gw.cols())}});
  fn({prefix + ".b", gb.data(), static_cast<size_t>(gb.size()),
      {static_cast<int>(gb.size())}});
}

void ResidualMlp::init(int in, int width, int n_blocks, int out, Rng& rng,
                       bool zero_tail) {
  head.init(in, width, rng);
  blocks.assign(static_cast<size_t>(n_blocks), {});
  for (auto& blk : blocks) {
    blk[0].init(width, width, rng);
    blk[1].init(width, width, rng);
  }
  if (zero_tail)
    tail.init_zero(width, out);
  else
    tail.init(width, out, rng);
}

Matrix ResidualMlp::forward(const Matrix& x) const {
  Matrix a0 = apply_act(head.forward(x), Act::LeakyRelu);
  Matrix h = a0;
  for (const auto& blk : blocks) {
    Matrix u = apply_act(blk[0].forward(h), Act::LeakyRelu);
    h += apply_act(blk[1].forward(u), Act::LeakyRelu);
  }
  if (long_skip) h += a0;
  return apply_act(tail.forward(h), out_act);
}

Matrix ResidualMlp::forward(const Matrix& x, MlpCache& cache) const {
  cache.x = x;
  cache.z_head = head.forward(x);
  Matrix a0 = apply_act(cache.z_head, Act::LeakyRelu);
  const size_t n = blocks.size();
  cache.block_in.resize(n);
  cache.z1.resize(n);
  cache.a1.resize(n);
  cache.z2.resize(n);
  Matrix h = a0;
  for (size_t i = 0; i < n; ++i) {
    cache.block_in[i] = h;
    cache.z1[i] = blocks[i][0].forward(h);
    cache.a1[i] = apply_act(cache.z1[i], Act::LeakyRelu);
    cache.z2[i] = blocks[i][1].forward(cache.a1[i]);
    h += apply_act(cache.z2[i], Act::LeakyRelu);
  }
  cache.tail_in = long_skip ? Matrix(h + a0) : h;
  cache.z_tail = tail.forward(cache.tail_in);
  return apply_act(cache.z_tail, out_act);
}

Matrix ResidualMlp::backward(const MlpCache& cache, const Matrix& dy) {
  Matrix dz_tail = act_backward(cache.z_tail, dy, out_act);
  Matrix dh = tail.backward(cache.tail_in, dz_tail);
  Matrix da0_skip;
  if (long_skip) da0_skip = dh;
  for (int i = static_cast<int>(blocks.size()) - 1; i >= 0; --i) {
    Matrix dz2 = act_backward(cache.z2[i], dh, Act::LeakyRelu);
    Matrix da1 = blocks[i][1].backward(cache.a1[i], dz2);
    Matrix dz1 = act_backward(cache.z1[i], da1, Act::LeakyRelu);
    dh += blocks[i][0].backward(cache.block_in[i], dz1);
  }
  if (long_skip) dh += da0_skip;
  Matrix dz_head = act_backward(cache.z_head, dh, Act::LeakyRelu);
  return head.backward(cache.x, dz_head);
}

void ResidualMlp::zero_grad() {
  head.zero_grad();
  for (auto& blk : blocks) {
    blk[0].zero_grad();
    blk[1].zero_grad();
  }
  tail.zero_grad();
}

void ResidualMlp::visit(const std::string& prefix, const ParamVisitor& fn) {
  head.visit(prefix + ".head", fn);
  for (size_t i = 0; i < blocks.size(); ++i) {
    blocks[i][0].visit(prefix + ".b" + std::to_string(i) + ".l0", fn);
    blocks[i][1].visit(prefix + ".b" + std::to_string(i) + ".l1", fn);
  }
  tail.visit(prefix + ".tail", fn);
}

void ResidualMlp::visit_grads(const std::string& prefix, const ParamVisitor& fn) {
  head.visit_grads(prefix + ".head", fn);
  for (size_t i = 0; i < blocks.size(); ++i) {
    blocks[i][0].visit_grads(prefix + ".b" + std::to_string(i) + ".l0", fn);
    blocks[i][1].visit_grads(prefix + ".b" + std::to_string(i) + ".l1", fn);
  }
  tail.visit_grads(prefix + ".tail", fn);
}

}  // namespace nelf
