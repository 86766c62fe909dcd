#include <doctest.h>

#include "nelf/net.hpp"
#include "test_util.hpp"

using namespace nelf;

namespace {

// Hand-evaluated residual MLP forward, written with plain loops.
std::vector<double> manual_mlp(const ResidualMlp& net, const std::vector<double>& in) {
  auto dense = [](const Dense& d, const std::vector<double>& x) {
    std::vector<double> y(static_cast<size_t>(d.out_dim()), 0.0);
    for (int o = 0; o < d.out_dim(); ++o) {
      double acc = d.b(o);
      for (int i = 0; i < d.in_dim(); ++i) acc += d.w(o, i) * x[static_cast<size_t>(i)];
      y[static_cast<size_t>(o)] = acc;
    }
    return y;
  };
  auto lrelu = [](std::vector<double> v) {
    for (double& x : v)
      if (x < 0) x *= kLeakySlope;
    return v;
  };

  std::vector<double> a0 = lrelu(dense(net.head, in));
  std::vector<double> h = a0;
  for (const auto& blk : net.blocks) {
    auto u = lrelu(dense(blk[0], h));
    auto v = lrelu(dense(blk[1], u));
    for (size_t i = 0; i < h.size(); ++i) h[i] += v[i];
  }
  if (net.long_skip)
    for (size_t i = 0; i < h.size(); ++i) h[i] += a0[i];
  std::vector<double> y = dense(net.tail, h);
  if (net.out_act == Act::Sigmoid)
    for (double& x : y) x = 1.0 / (1.0 + std::exp(-x));
  return y;
}

}  // namespace

TEST_SUITE("net") {

TEST_CASE("dense layer matches a double loop") {
  Rng rng(1);
  Dense d;
  d.init(5, 3, rng);
  Matrix x(2, 5);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  Matrix y = d.forward(x);
  for (int r = 0; r < 2; ++r) {
    for (int o = 0; o < 3; ++o) {
      double acc = d.b(o);
      for (int i = 0; i < 5; ++i) acc += d.w(o, i) * x(r, i);
      CHECK(y(r, o) == doctest::Approx(acc).epsilon(1e-12));
    }
  }
}

TEST_CASE("residual mlp with skip matches the manual oracle") {
  Rng rng(2);
  for (bool skip : {false, true}) {
    for (auto act : {Act::None, Act::Sigmoid}) {
      ResidualMlp net;
      net.init(7, 6, 2, 4, rng);
      net.long_skip = skip;
      net.out_act = act;
      std::vector<double> in(7);
      for (auto& v : in) v = rng.normal();
      Matrix x = Eigen::Map<const Vector>(in.data(), 7).transpose();
      Matrix y = net.forward(x);
      auto expect = manual_mlp(net, in);
      for (int i = 0; i < 4; ++i)
        CHECK(y(0, i) == doctest::Approx(expect[static_cast<size_t>(i)]).epsilon(1e-10));
    }
  }
}

TEST_CASE("cached forward equals plain forward") {
  Rng rng(3);
  ResidualMlp net;
  net.init(5, 8, 3, 2, rng);
  net.long_skip = true;
  Matrix x(4, 5);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  MlpCache cache;
  Matrix a = net.forward(x);
  Matrix b = net.forward(x, cache);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero-initialized network maps anything to zero") {
  Rng rng(4);
  ResidualMlp net;
  net.init(4, 6, 2, 3, rng);
  net.long_skip = true;
  net.visit("n", [](const ParamView& p) {
    std::fill(p.data, p.data + p.size, 0.0);
  });
  Matrix x(1, 4);
  x << 0.3, -1.2, 0.7, 2.0;
  Matrix y = net.forward(x);
  CHECK(y.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mlp backward matches finite differences on a scalar objective") {
  Rng rng(5);
  ResidualMlp net;
  net.init(6, 7, 2, 3, rng);
  net.long_skip = true;
  Matrix x(3, 6);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  Matrix w(3, 3);
  for (int i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();

  auto loss_of = [&]() {
    Matrix y = net.forward(x);
    return (y.cwiseProduct(w)).sum();
  };

  net.zero_grad();
  MlpCache cache;
  Matrix y = net.forward(x, cache);
  Matrix dx = net.backward(cache, w);

  // parameter gradients
  std::vector<std::pair<double*, size_t>> slots;
  std::vector<double> analytic;
  net.visit_grads("g", [&](const ParamView& g) {
    analytic.insert(analytic.end(), g.data, g.data + g.size);
  });
  net.visit("g", [&](const ParamView& p) {
    slots.emplace_back(p.data, p.size);
  });
  const double h = 1e-6;
  size_t flat = 0;
  Rng pick(77);
  for (int s = 0; s < 60; ++s) {
    size_t total = 0;
    for (auto& sl : slots) total += sl.second;
    size_t idx = pick.uniform_index(total);
    flat = idx;
    size_t gi = 0;
    while (idx >= slots[gi].second) {
      idx -= slots[gi].second;
      ++gi;
    }
    double* p = slots[gi].first + idx;
    const double orig = *p;
    *p = orig + h;
    const double lp = loss_of();
    *p = orig - h;
    const double lm = loss_of();
    *p = orig;
    const double fd = (lp - lm) / (2 * h);
    CHECK(std::abs(fd - analytic[flat]) <
          1e-4 * std::max({std::abs(fd), std::abs(analytic[flat]), 1e-6}));
  }

  // input gradients
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 6; ++c) {
      const double orig = x(r, c);
      x(r, c) = orig + h;
      const double lp = loss_of();
      x(r, c) = orig - h;
      const double lm = loss_of();
      x(r, c) = orig;
      const double fd = (lp - lm) / (2 * h);
      CHECK(std::abs(fd - dx(r, c)) <
            1e-4 * std::max({std::abs(fd), std::abs(dx(r, c)), 1e-6}));
    }
  }
}

TEST_CASE("param visiting is stable and complete") {
  Rng rng(6);
  ResidualMlp net;
  net.init(3, 4, 2, 2, rng);
  std::vector<std::string> names1, names2;
  size_t total = 0;
  net.visit("net", [&](const ParamView& p) {
    names1.push_back(p.name);
    total += p.size;
  });
  net.visit("net", [&](const ParamView& p) { names2.push_back(p.name); });
  CHECK(names1 == names2);
  // head 3*4+4, 2 blocks of 2*(4*4+4), tail 4*2+2
  CHECK(total == 16 + 2 * 40 + 10);
}

}  // TEST_SUITE
