#pragma once

#include "bgcn/graph_ops.hpp"
#include "test_support.hpp"

#include <string>
#include <utility>
#include <vector>

namespace bgcn::testing {

// Loss = <output, weights>, so dLoss/doutput = weights.
inline double probe_loss(const ForecastModel& model, const MatrixXd& input, const MatrixXd& weights,
                         const std::vector<MatrixXd>& masks) {
  GraphSampler sampler = GraphSampler::fixed(masks);
  return model.forward(input, true, sampler).cwiseProduct(weights).sum();
}

// Relative error between the analytic gradient and central differences
// (h = 1e-6) for every trainable parameter, under one frozen dropout mask.
inline std::vector<std::pair<std::string, double>> gradient_errors(const BackboneConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  const Index n = config.num_nodes;
  MatrixXd constant = normalize_adjacency(random_matrix(n, n, rng, 0.0, 1.0));
  ForecastModel model(config, constant, seed);
  // Move phi off its tiny constant start so its gradient path is exercised.
  for (auto& p : model.parameters())
    if (p.name == "phi" && p.trainable) p.value = random_matrix(n, n, rng, -0.3, 0.3);
  const MatrixXd input = random_matrix(config.features_in, config.t_in * n, rng);
  const MatrixXd weights = random_matrix(config.horizon * config.features_out, n, rng);
  const std::vector<MatrixXd> masks = draw_layer_masks(config, rng);

  GraphSampler sampler = GraphSampler::fixed(masks);
  const auto trace = model.forward_trace(input, true, sampler);
  std::vector<MatrixXd> grads = model.zero_gradients();
  model.backward(trace, weights, grads);

  const double h = 1e-6;
  std::vector<std::pair<std::string, double>> out;
  auto& params = model.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p].trainable) continue;
    MatrixXd numeric(params[p].value.rows(), params[p].value.cols());
    for (Index j = 0; j < numeric.cols(); ++j)
      for (Index i = 0; i < numeric.rows(); ++i) {
        const double saved = params[p].value(i, j);
        params[p].value(i, j) = saved + h;
        const double up = probe_loss(model, input, weights, masks);
        params[p].value(i, j) = saved - h;
        const double down = probe_loss(model, input, weights, masks);
        params[p].value(i, j) = saved;
        numeric(i, j) = (up - down) / (2 * h);
      }
    out.emplace_back(params[p].name, relative_error(grads[p], numeric));
  }
  return out;
}

}  // namespace bgcn::testing
