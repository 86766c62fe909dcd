#include "nelf/encoder.hpp"

namespace nelf {

void ExpressionEncoder::init(int d_e_, int n_lf_, int d_lf_, int width, int n_blocks,
                             int ray_rep_dim, Rng& rng) {
  d_e = d_e_;
  n_lf = n_lf_;
  d_lf = d_lf_;
  feature_net.init(d_e, width, n_blocks, n_lf * d_lf, rng);
  attention_net.init(ray_rep_dim + d_e, width, n_blocks, n_lf, rng);
  attention_net.out_act = Act::Sigmoid;
}

Matrix ExpressionEncoder::local_feature_bank(const Vector& e) const {
  check(e.size() == d_e, "local_feature_bank: expression code dimension mismatch");
  counters().bank_evals.fetch_add(1, std::memory_order_relaxed);
  Matrix out = feature_net.forward(e.transpose());
  return Eigen::Map<const Matrix>(out.data(), d_lf, n_lf).transpose();
}

Matrix ExpressionEncoder::local_feature_bank(const Vector& e, MlpCache& cache) const {
  check(e.size() == d_e, "local_feature_bank: expression code dimension mismatch");
  counters().bank_evals.fetch_add(1, std::memory_order_relaxed);
  Matrix out = feature_net.forward(e.transpose(), cache);
  return Eigen::Map<const Matrix>(out.data(), d_lf, n_lf).transpose();
}

Vector ExpressionEncoder::feature_bank_backward(const MlpCache& cache,
                                                const Matrix& d_bank) {
  Matrix flat = d_bank.transpose();  // d_lf x n_lf, column-major = row order
  Matrix d_row = Eigen::Map<const Matrix>(flat.data(), 1, n_lf * d_lf);
  Matrix de = feature_net.backward(cache, d_row);
  return de.row(0).transpose();
}

Matrix ExpressionEncoder::spatial_attention(const Matrix& rep_and_code) const {
  check(rep_and_code.cols() == attention_net.in_dim(),
        "spatial_attention: input dimension mismatch");
  return attention_net.forward(rep_and_code);
}

Matrix ExpressionEncoder::spatial_attention(const Matrix& rep_and_code,
                                            MlpCache& cache) const {
  check(rep_and_code.cols() == attention_net.in_dim(),
        "spatial_attention: input dimension mismatch");
  return attention_net.forward(rep_and_code, cache);
}

Matrix ExpressionEncoder::attention_backward(const MlpCache& cache,
                                             const Matrix& d_weights) {
  return attention_net.backward(cache, d_weights);
}

void ExpressionEncoder::zero_grad() {
  feature_net.zero_grad();
  attention_net.zero_grad();
}

void ExpressionEncoder::visit(const std::string& prefix, const ParamVisitor& fn) {
  feature_net.visit(prefix + ".feat", fn);
  attention_net.visit(prefix + ".attn", fn);
}

void ExpressionEncoder::visit_grads(const std::string& prefix, const ParamVisitor& fn) {
  feature_net.visit_grads(prefix + ".feat", fn);
  attention_net.visit_grads(prefix + ".attn", fn);
}

Matrix expression_representation(const Matrix& weights, const Matrix& bank) {
  check(weights.cols() == bank.rows(),
        "expression_representation: inner dimensions disagree");
  return weights * bank;
}

}  // namespace nelf
