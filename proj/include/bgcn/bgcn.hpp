#pragma once

#include "bgcn/common.hpp"
#include "bgcn/rng.hpp"

#include <cstdint>

namespace bgcn {

// Generative graph model: a frozen constant adjacency plus a learnable,
// sign-unconstrained adjacency, sampled with elementwise dropout.
template <typename Scalar = double>
struct BayesianGraph {
  Matrix<Scalar> constant;  // normalized MAP adjacency, never trained
  Matrix<Scalar> phi;       // learnable, may be negative and asymmetric
  Scalar dropout_rate = Scalar(0.5);
  std::uint64_t rng_seed = 0;

  Index num_nodes() const { return constant.rows(); }
  Matrix<Scalar> mean_graph() const { return constant + phi; }
};

// Inverted-dropout mask: each entry is 0 with probability p and 1/(1-p)
// otherwise, so E[mask] = 1.
template <typename Scalar = double>
Matrix<Scalar> dropout_mask(Index rows, Index cols, Scalar rate, Rng& rng) {
  if (!(rate >= Scalar(0) && rate < Scalar(1))) throw UsageError("dropout rate must lie in [0, 1)");
  if (rate == Scalar(0)) return Matrix<Scalar>::Ones(rows, cols);
  const Scalar keep_scale = Scalar(1) / (Scalar(1) - rate);
  Matrix<Scalar> mask(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) mask(i, j) = rng.uniform() < static_cast<double>(rate) ? Scalar(0) : keep_scale;
  return mask;
}

// One graph realization: Dropout(constant + phi) when training, the
// expectation constant + phi otherwise.
template <typename Scalar>
Matrix<Scalar> sample_graph(const BayesianGraph<Scalar>& graph, bool training, Rng& rng) {
  if (!training || graph.dropout_rate == Scalar(0)) return graph.mean_graph();
  return graph.mean_graph().cwiseProduct(dropout_mask(graph.constant.rows(), graph.constant.cols(), graph.dropout_rate, rng));
}

// Graph convolution f(X) = G X W with G = sample_graph(graph, training).
// X is N x D_in, W is D_in x D_out.
template <typename Scalar, typename DX, typename DW>
Matrix<Scalar> bgcn_forward(const Eigen::MatrixBase<DX>& x, const BayesianGraph<Scalar>& graph,
                            const Eigen::MatrixBase<DW>& weights, bool training, Rng& rng) {
  if (x.rows() != graph.num_nodes() || graph.phi.rows() != graph.num_nodes() || graph.phi.cols() != graph.num_nodes())
    throw ShapeError("graph convolution: input has " + std::to_string(x.rows()) + " nodes, graph has " +
                     shape_string(graph.constant.rows(), graph.constant.cols()));
  if (x.cols() != weights.rows())
    throw ShapeError("graph convolution: input width " + std::to_string(x.cols()) + " does not match weights " +
                     shape_string(weights.rows(), weights.cols()));
  return sample_graph(graph, training, rng) * (x * weights);
}

}  // namespace bgcn
