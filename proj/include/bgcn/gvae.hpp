#pragma once

#include "bgcn/common.hpp"
#include "bgcn/graph_ops.hpp"
#include "bgcn/rng.hpp"

#include <cstdint>
#include <vector>

namespace bgcn {

struct GvaeConfig {
  int hidden = 32;
  int latent = 16;
  int epochs = 200;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
};

struct NodeEmbeddings {
  MatrixXd vectors;  // exported embeddings (posterior means)
  MatrixXd mu;
  MatrixXd log_var;
  std::vector<double> loss_trace;  // one entry per epoch

  Index dim() const { return vectors.cols(); }
};

// z = mu + eps .* exp(log_var / 2). With log_var = -inf the sample is mu.
template <typename Scalar>
Matrix<Scalar> reparameterize(const Matrix<Scalar>& mu, const Matrix<Scalar>& log_var, const Matrix<Scalar>& noise) {
  return mu + noise.cwiseProduct((Scalar(0.5) * log_var.array()).exp().matrix());
}

// KL(N(mu, exp(log_var)) || N(0, 1)), summed over all entries.
template <typename Scalar>
Scalar gaussian_kl(const Matrix<Scalar>& mu, const Matrix<Scalar>& log_var) {
  return Scalar(-0.5) * (Scalar(1) + log_var.array() - mu.array().square() - log_var.array().exp()).sum();
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Two-layer graph-convolutional variational auto-encoder with featureless
// (identity) input and an inner-product decoder.
class Gvae {
 public:
  struct Parameters {
    MatrixXd w_hidden;   // N x hidden
    MatrixXd w_mu;       // hidden x latent
    MatrixXd w_log_var;  // hidden x latent
  };

  struct Loss {
    double reconstruction = 0.0;
    double kl = 0.0;
    double total() const { return reconstruction + kl; }
  };

  // `adjacency` may be directed; it is symmetrized as max(A, A^T).
  Gvae(const MatrixXd& adjacency, const GvaeConfig& config);

  const MatrixXd& propagation() const { return propagation_; }
  const MatrixXd& labels() const { return labels_; }
  Parameters& parameters() { return params_; }
  const Parameters& parameters() const { return params_; }

  // Loss for a given reparameterization noise (N x latent). When `grad` is
  // given it receives dLoss/dParameters.
  Loss evaluate(const MatrixXd& noise, Parameters* grad = nullptr) const;

  void encode(MatrixXd& mu, MatrixXd& log_var) const;

  double pos_weight() const { return pos_weight_; }
  double norm() const { return norm_; }

 private:
  MatrixXd propagation_;  // D^{-1/2}(S + I)D^{-1/2}
  MatrixXd labels_;       // 1 where S + I > 0
  double pos_weight_ = 1.0;
  double norm_ = 1.0;
  Parameters params_;
};

// Trains the auto-encoder with Adam and returns the posterior means as
// embeddings. Throws DivergenceError on a non-finite loss.
NodeEmbeddings gvae_train(const MatrixXd& adjacency, const GvaeConfig& config);

}  // namespace bgcn
