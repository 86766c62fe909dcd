#pragma once

#include "nelf/net.hpp"

namespace nelf {

// Local feature bank Z (N_lf x D_lf) produced from the expression code, plus
// per-ray sigmoid attention weights W (1 x N_lf); the per-ray expression
// representation is the product W * Z.
struct ExpressionEncoder {
  int d_e = 4;
  int n_lf = 16;
  int d_lf = 32;
  ResidualMlp feature_net;    // e -> N_lf * D_lf, reshaped row-major
  ResidualMlp attention_net;  // [encoded ray rep | e] -> N_lf, sigmoid output

  void init(int d_e_, int n_lf_, int d_lf_, int width, int n_blocks, int ray_rep_dim,
            Rng& rng);

  // One bank per frame; rows of the returned matrix are bank entries.
  Matrix local_feature_bank(const Vector& e) const;
  Matrix local_feature_bank(const Vector& e, MlpCache& cache) const;
  // Returns d(loss)/d(e), usually discarded (codes are data, not parameters).
  Vector feature_bank_backward(const MlpCache& cache, const Matrix& d_bank);

  // rep_and_code: B x (ray_rep_dim + d_e). Every output entry is in (0,1).
  Matrix spatial_attention(const Matrix& rep_and_code) const;
  Matrix spatial_attention(const Matrix& rep_and_code, MlpCache& cache) const;
  Matrix attention_backward(const MlpCache& cache, const Matrix& d_weights);

  void zero_grad();
  void visit(const std::string& prefix, const ParamVisitor& fn);
  void visit_grads(const std::string& prefix, const ParamVisitor& fn);
};

// I_exp = W * Z for a batch of weight rows sharing one bank.
Matrix expression_representation(const Matrix& weights, const Matrix& bank);

}  // namespace nelf
