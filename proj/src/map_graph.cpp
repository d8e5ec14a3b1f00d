#include "bgcn/map_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bgcn {

void MapGraphConfig::validate() const {
  if (!(alpha > 0)) throw UsageError("map graph: alpha must be positive");
  if (!(beta > 0)) throw UsageError("map graph: beta must be positive");
  if (!(tol > 0)) throw UsageError("map graph: tol must be positive");
  if (max_iters < 1) throw UsageError("map graph: max_iters must be at least 1");
  if (step_rule == StepRule::fixed && !(fixed_step > 0)) throw UsageError("map graph: fixed_step must be positive");
}

Index edge_count(Index num_nodes) { return num_nodes * (num_nodes - 1) / 2; }

VectorXd upper_triangle(const MatrixXd& symmetric) {
  const Index n = symmetric.rows();
  VectorXd w(edge_count(n));
  Index k = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) w(k++) = symmetric(i, j);
  return w;
}

MatrixXd expand_upper_triangle(const VectorXd& weights, Index num_nodes) {
  if (weights.size() != edge_count(num_nodes))
    throw ShapeError("edge vector of length " + std::to_string(weights.size()) + " does not fit " +
                     std::to_string(num_nodes) + " nodes");
  MatrixXd a = MatrixXd::Zero(num_nodes, num_nodes);
  Index k = 0;
  for (Index i = 0; i < num_nodes; ++i)
    for (Index j = i + 1; j < num_nodes; ++j) {
      a(i, j) = weights(k);
      a(j, i) = weights(k);
      ++k;
    }
  return a;
}

namespace {

VectorXd edge_degrees(const VectorXd& w, Index n) {
  VectorXd degree = VectorXd::Zero(n);
  Index k = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      degree(i) += w(k);
      degree(j) += w(k);
      ++k;
    }
  return degree;
}

}  // namespace

double map_objective_edges(const VectorXd& weights, const VectorXd& edge_distances, Index num_nodes, double alpha,
                           double beta) {
  const VectorXd degree = edge_degrees(weights, num_nodes);
  if ((degree.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
  return 2.0 * weights.dot(edge_distances) - alpha * degree.array().log().sum() + 2.0 * beta * weights.squaredNorm();
}

VectorXd map_gradient_edges(const VectorXd& weights, const VectorXd& edge_distances, Index num_nodes, double alpha,
                            double beta) {
  const VectorXd inv_degree = edge_degrees(weights, num_nodes).cwiseInverse();
  VectorXd grad(weights.size());
  Index k = 0;
  for (Index i = 0; i < num_nodes; ++i)
    for (Index j = i + 1; j < num_nodes; ++j) {
      grad(k) = 2.0 * edge_distances(k) - alpha * (inv_degree(i) + inv_degree(j)) + 4.0 * beta * weights(k);
      ++k;
    }
  return grad;
}

MapGraph solve_map_graph(const MatrixXd& distances, const MapGraphConfig& config) {
  config.validate();
  const Index n = distances.rows();
  if (distances.cols() != n) throw ShapeError("distance matrix must be square");
  if (!distances.allFinite()) throw DataError("distance matrix has non-finite entries");
  if ((distances.array() < 0.0).any()) throw DataError("distance matrix has negative entries");
  if ((distances - distances.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, distances.cwiseAbs().maxCoeff()))
    throw DataError("distance matrix must be symmetric");
  if (n > 0 && distances.diagonal().cwiseAbs().maxCoeff() != 0.0) throw DataError("distance matrix diagonal must be 0");

  MapGraph result;
  if (n <= 1) {
    result.adjacency = MatrixXd::Zero(n, n);
    result.normalized = normalize_adjacency(result.adjacency);
    result.converged = true;
    return result;
  }

  VectorXd z = upper_triangle(0.5 * (distances + distances.transpose()));
  if (config.normalize_distances) {
    const double mean = z.mean();
    if (mean > 0.0) {
      result.distance_scale = mean;
      z /= mean;
    }
  }

  const auto m = static_cast<double>(z.size());
  const double nd = static_cast<double>(n);
  const double& alpha = config.alpha;
  const double& beta = config.beta;
  auto objective = [&](const VectorXd& w) { return map_objective_edges(w, z, n, alpha, beta); };
  auto gradient = [&](const VectorXd& w) { return map_gradient_edges(w, z, n, alpha, beta); };

  // Start from the best constant weight: the positive root of
  // 4 beta M c^2 + 2 sum(z) c - alpha N = 0.
  const double zsum = z.sum();
  const double c0 = (-2.0 * zsum + std::sqrt(4.0 * zsum * zsum + 16.0 * beta * m * alpha * nd)) / (8.0 * beta * m);
  VectorXd w = VectorXd::Constant(z.size(), c0);
  double f = objective(w);
  VectorXd g = gradient(w);
  result.objective_trace.push_back(f);

  double step = 1.0 / (4.0 * beta + 2.0 * alpha / (c0 * c0));
  VectorXd w_prev, g_prev;
  for (int iter = 1; iter <= config.max_iters; ++iter) {
    if (config.step_rule == StepRule::fixed) {
      step = config.fixed_step;
    } else if (w_prev.size() > 0) {
      // Barzilai-Borwein trial step, then backtrack.
      const VectorXd s = w - w_prev;
      const VectorXd y = g - g_prev;
      const double sy = s.dot(y);
      step = sy > 0.0 ? s.squaredNorm() / sy : 2.0 * step;
    }

    VectorXd w_next;
    double f_next = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int halving = 0; halving < 80; ++halving) {
      w_next = (w - step * g).cwiseMax(0.0);
      f_next = objective(w_next);
      const VectorXd d = w_next - w;
      const double model = f + g.dot(d) + d.squaredNorm() / (2.0 * step);
      if (std::isfinite(f_next) && f_next <= model && f_next <= f) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    result.iterations = iter;
    if (!accepted) {
      // No further decrease representable in floating point.
      result.converged = (w - (w - g).cwiseMax(0.0)).lpNorm<Eigen::Infinity>() < 1e-6;
      break;
    }

    const double change = std::abs(f - f_next) / std::max(1.0, std::abs(f));
    w_prev = std::move(w);
    g_prev = std::move(g);
    w = std::move(w_next);
    f = f_next;
    g = gradient(w);
    result.objective_trace.push_back(f);
    if (change < config.tol) {
      result.converged = true;
      break;
    }
  }

  result.adjacency = expand_upper_triangle(w, n);
  result.final_objective = f;
  result.normalized = normalize_adjacency(result.adjacency);
  return result;
}

}  // namespace bgcn
