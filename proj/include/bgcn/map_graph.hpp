#pragma once

#include "bgcn/common.hpp"
#include "bgcn/graph_ops.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace bgcn {

enum class StepRule { fixed, backtracking };

struct MapGraphConfig {
  double alpha = 1.0;  // log-barrier weight on node degrees
  double beta = 0.5;   // Frobenius weight
  int max_iters = 20000;
  double tol = 1e-13;  // relative objective change
  StepRule step_rule = StepRule::backtracking;
  double fixed_step = 1e-3;
  // Rescale Z to unit mean off-diagonal entry before solving.
  bool normalize_distances = true;

  void validate() const;
};

struct MapGraph {
  MatrixXd adjacency;   // symmetric, nonnegative, zero diagonal
  MatrixXd normalized;  // symmetric self-loop normalization of `adjacency`
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
  double distance_scale = 1.0;  // Z was divided by this before solving
  double final_objective = 0.0;
};

// ||A .* Z||_1 - alpha * sum_i log(deg_i) + beta * ||A||_F^2.
template <typename DA, typename DZ>
typename DA::Scalar map_objective(const Eigen::MatrixBase<DA>& adjacency, const Eigen::MatrixBase<DZ>& distances,
                                  typename DA::Scalar alpha, typename DA::Scalar beta) {
  using Scalar = typename DA::Scalar;
  if (adjacency.rows() != distances.rows() || adjacency.cols() != distances.cols())
    throw ShapeError("objective: adjacency " + shape_string(adjacency.rows(), adjacency.cols()) + " vs distances " +
                     shape_string(distances.rows(), distances.cols()));
  const Vector<Scalar> degree = adjacency.rowwise().sum();
  for (Index i = 0; i < degree.size(); ++i)
    if (!(degree(i) > Scalar(0)))
      throw BarrierViolationError("log barrier undefined: node " + std::to_string(i) + " has degree " +
                                  std::to_string(static_cast<double>(degree(i))));
  return adjacency.cwiseProduct(distances).cwiseAbs().sum() - alpha * degree.array().log().sum() +
         beta * adjacency.squaredNorm();
}

// Edge-vector parameterization: w holds the strict upper triangle, row-major.
Index edge_count(Index num_nodes);
VectorXd upper_triangle(const MatrixXd& symmetric);
MatrixXd expand_upper_triangle(const VectorXd& weights, Index num_nodes);

// Objective and gradient in the edge parameterization (2 z_k w_k per edge,
// since each edge appears twice in the symmetric matrix). Returns +inf when a
// degree is nonpositive.
double map_objective_edges(const VectorXd& weights, const VectorXd& edge_distances, Index num_nodes, double alpha,
                           double beta);
VectorXd map_gradient_edges(const VectorXd& weights, const VectorXd& edge_distances, Index num_nodes, double alpha,
                            double beta);

// Projected gradient descent on w >= 0 with backtracking line search.
// Non-convergence is reported through MapGraph::converged, not an exception.
MapGraph solve_map_graph(const MatrixXd& distances, const MapGraphConfig& config = {});

}  // namespace bgcn
