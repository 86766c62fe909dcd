#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "nelf/common.hpp"
#include "nelf/rng.hpp"

namespace nelf {

using Matrix = Eigen::MatrixXd;  // batches are rows
using Vector = Eigen::VectorXd;

enum class Act { None, LeakyRelu, Sigmoid };

constexpr double kLeakySlope = 0.01;

Matrix apply_act(const Matrix& z, Act act);
// Elementwise dL/dz given dL/da and the pre-activation z.
Matrix act_backward(const Matrix& z, const Matrix& da, Act act);

// Named view over a parameter array; the traversal order is the canonical
// order for checkpoints and the optimizer.
struct ParamView {
  std::string name;
  double* data;
  size_t size;
  std::vector<int> shape;
};

using ParamVisitor = std::function<void(const ParamView&)>;

struct Dense {
  Matrix w;   // out x in
  Vector b;   // out
  Matrix gw;
  Vector gb;

  void init(int in, int out, Rng& rng, double gain = 1.0);
  void init_zero(int in, int out);

  int in_dim() const { return static_cast<int>(w.cols()); }
  int out_dim() const { return static_cast<int>(w.rows()); }

  // x: B x in -> B x out.
  Matrix forward(const Matrix& x) const;
  // Accumulates gw/gb, returns dL/dx.
  Matrix backward(const Matrix& x, const Matrix& dy);

  void zero_grad();
  void visit(const std::string& prefix, const ParamVisitor& fn);
  void visit_grads(const std::string& prefix, const ParamVisitor& fn);
};

// Per-call activation cache for one ResidualMlp forward.
struct MlpCache {
  Matrix x;
  Matrix z_head;
  std::vector<Matrix> block_in;  // input to each residual block
  std::vector<Matrix> z1, a1, z2;
  Matrix tail_in;
  Matrix z_tail;
};

// head -> LeakyReLU -> residual blocks (two layers each, identity shortcut)
// -> tail, with an optional long skip adding the head activation to the tail
// input, and an optional output activation.
struct ResidualMlp {
  Dense head;
  std::vector<std::array<Dense, 2>> blocks;
  Dense tail;
  bool long_skip = false;
  Act out_act = Act::None;

  void init(int in, int width, int n_blocks, int out, Rng& rng, bool zero_tail = false);

  int in_dim() const { return head.in_dim(); }
  int out_dim() const { return tail.out_dim(); }

  Matrix forward(const Matrix& x) const;
  Matrix forward(const Matrix& x, MlpCache& cache) const;
  // Accumulates parameter grads, returns dL/dx.
  Matrix backward(const MlpCache& cache, const Matrix& dy);

  void zero_grad();
  void visit(const std::string& prefix, const ParamVisitor& fn);
  void visit_grads(const std::string& prefix, const ParamVisitor& fn);
};

}  // namespace nelf
