#include "bgcn/gvae.hpp"

#include "bgcn/adam.hpp"

#include <cmath>

namespace bgcn {

void GvaeConfig::validate() const {
  if (hidden < 1) throw UsageError("gvae: hidden width must be positive");
  if (latent < 2) throw UsageError("gvae: latent dimension must be at least 2");
  if (epochs < 0) throw UsageError("gvae: epochs must be nonnegative");
  if (!(learning_rate > 0)) throw UsageError("gvae: learning rate must be positive");
}

namespace {

double softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }

MatrixXd glorot(Index rows, Index cols, Rng& rng) {
  const double range = std::sqrt(6.0 / static_cast<double>(rows + cols));
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-range, range);
  return m;
}

}  // namespace

Gvae::Gvae(const MatrixXd& adjacency, const GvaeConfig& config) {
  config.validate();
  const Index n = adjacency.rows();
  if (n == 0 || adjacency.cols() != n) throw ShapeError("gvae: adjacency must be a nonempty square matrix");
  if (!adjacency.allFinite()) throw DataError("gvae: adjacency has non-finite entries");
  MatrixXd sym = adjacency.cwiseMax(adjacency.transpose());
  sym.diagonal().setZero();
  if ((sym.array() <= 0.0).all()) throw DataError("gvae: observed adjacency has no edges");

  propagation_ = normalize_adjacency(sym, NormalizationMode::symmetric);
  labels_ = (sym.array() > 0.0).cast<double>().matrix();
  labels_.diagonal().setOnes();

  const double total = static_cast<double>(n * n);
  const double positives = labels_.sum();
  pos_weight_ = (total - positives) / positives;
  norm_ = total / (2.0 * (total - positives));
  if (!(total > positives)) {
    // Complete graph: no negatives to balance against.
    pos_weight_ = 1.0;
    norm_ = 1.0;
  }

  Rng rng(config.seed);
  params_.w_hidden = glorot(n, config.hidden, rng);
  params_.w_mu = glorot(config.hidden, config.latent, rng);
  params_.w_log_var = glorot(config.hidden, config.latent, rng);
}

void Gvae::encode(MatrixXd& mu, MatrixXd& log_var) const {
  const MatrixXd hidden = (propagation_ * params_.w_hidden).cwiseMax(0.0);
  const MatrixXd pooled = propagation_ * hidden;
  mu = pooled * params_.w_mu;
  log_var = pooled * params_.w_log_var;
}

Gvae::Loss Gvae::evaluate(const MatrixXd& noise, Parameters* grad) const {
  const Index n = propagation_.rows();
  const double cells = static_cast<double>(n * n);
  const MatrixXd pre_hidden = propagation_ * params_.w_hidden;
  const MatrixXd hidden = pre_hidden.cwiseMax(0.0);
  const MatrixXd pooled = propagation_ * hidden;
  const MatrixXd mu = pooled * params_.w_mu;
  const MatrixXd log_var = pooled * params_.w_log_var;
  const MatrixXd latent = reparameterize(mu, log_var, noise);
  const MatrixXd logits = latent * latent.transpose();

  Loss loss;
  double recon = 0.0;
  MatrixXd grad_logits(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) {
      const double x = logits(i, j);
      const double y = labels_(i, j);
      recon += pos_weight_ * y * softplus(-x) + (1.0 - y) * softplus(x);
      const double p = logistic(x);
      grad_logits(i, j) = norm_ / cells * (pos_weight_ * y * (p - 1.0) + (1.0 - y) * p);
    }
  loss.reconstruction = norm_ * recon / cells;
  loss.kl = gaussian_kl(mu, log_var) / cells;
  if (!grad) return loss;

  const MatrixXd grad_latent = (grad_logits + grad_logits.transpose()) * latent;
  const MatrixXd std_dev = (0.5 * log_var.array()).exp().matrix();
  const MatrixXd grad_mu = grad_latent + mu / cells;
  const MatrixXd grad_log_var =
      (grad_latent.array() * noise.array() * 0.5 * std_dev.array()).matrix() -
      (0.5 / cells) * (1.0 - log_var.array().exp()).matrix();
  grad->w_mu = pooled.transpose() * grad_mu;
  grad->w_log_var = pooled.transpose() * grad_log_var;
  const MatrixXd grad_pooled = grad_mu * params_.w_mu.transpose() + grad_log_var * params_.w_log_var.transpose();
  MatrixXd grad_hidden = propagation_.transpose() * grad_pooled;
  grad_hidden = (pre_hidden.array() > 0.0).select(grad_hidden, 0.0);
  grad->w_hidden = propagation_.transpose() * grad_hidden;
  return loss;
}

NodeEmbeddings gvae_train(const MatrixXd& adjacency, const GvaeConfig& config) {
  Gvae model(adjacency, config);
  Rng rng(config.seed ^ 0x5eedULL);
  Adam adam;
  NodeEmbeddings out;
  const Index n = adjacency.rows();
  Gvae::Parameters grad;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    MatrixXd noise(n, config.latent);
    for (Index j = 0; j < noise.cols(); ++j)
      for (Index i = 0; i < n; ++i) noise(i, j) = rng.normal();
    const Gvae::Loss loss = model.evaluate(noise, &grad);
    if (!std::isfinite(loss.total()))
      throw DivergenceError("gvae: non-finite loss at epoch " + std::to_string(epoch));
    out.loss_trace.push_back(loss.total());
    adam.begin_step();
    auto& p = model.parameters();
    adam.update(0, p.w_hidden, grad.w_hidden, config.learning_rate);
    adam.update(1, p.w_mu, grad.w_mu, config.learning_rate);
    adam.update(2, p.w_log_var, grad.w_log_var, config.learning_rate);
  }
  model.encode(out.mu, out.log_var);
  if (!out.mu.allFinite()) throw DivergenceError("gvae: non-finite embeddings after training");
  out.vectors = out.mu;
  return out;
}

}  // namespace bgcn
