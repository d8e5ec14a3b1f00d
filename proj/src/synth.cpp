#include "bgcn/synth.hpp"

#include "bgcn/rng.hpp"

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

namespace bgcn {

void SyntheticSpec::validate() const {
  if (n_nodes < 2) throw UsageError("synth: n_nodes must be at least 2");
  if (days < 1) throw UsageError("synth: days must be positive");
  if (!(negative_edge_fraction >= 0 && negative_edge_fraction < 1))
    throw UsageError("synth: negative_edge_fraction must lie in [0, 1)");
  if (!(noise_std >= 0) || !(daily_amplitude >= 0)) throw UsageError("synth: noise_std and amplitude must be nonnegative");
  if (!(saturation > 0)) throw UsageError("synth: saturation must be positive");
  if (neighbors < 1 || neighbors >= n_nodes) throw UsageError("synth: neighbors must lie in [1, n_nodes)");
  if (burn_in < 0) throw UsageError("synth: burn_in must be nonnegative");
  if (ground_truth_graph.size() != 0 &&
      (ground_truth_graph.rows() != n_nodes || ground_truth_graph.cols() != n_nodes))
    throw UsageError("synth: ground_truth_graph must be n_nodes x n_nodes");
}

namespace {

double spectral_radius(const MatrixXd& m) {
  Eigen::EigenSolver<MatrixXd> solver(m, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const Index n = spec.n_nodes;
  Rng root(spec.seed);
  Rng layout = root.split(0), weights = root.split(1), signal = root.split(2);

  std::vector<double> px(static_cast<std::size_t>(n)), py(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    px[static_cast<std::size_t>(i)] = layout.uniform(0.0, 10.0);
    py[static_cast<std::size_t>(i)] = layout.uniform(0.0, 10.0);
  }
  auto dist = [&](Index i, Index j) {
    const double dx = px[static_cast<std::size_t>(i)] - px[static_cast<std::size_t>(j)];
    const double dy = py[static_cast<std::size_t>(i)] - py[static_cast<std::size_t>(j)];
    return std::sqrt(dx * dx + dy * dy);
  };

  // k-nearest-neighbour road topology, symmetrized.
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> link =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, n, false);
  for (Index i = 0; i < n; ++i) {
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return dist(i, a) < dist(i, b); });
    int taken = 0;
    for (Index j : order) {
      if (j == i) continue;
      link(i, j) = link(j, i) = true;
      if (++taken == spec.neighbors) break;
    }
  }

  SyntheticData out;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (link(i, j)) out.distances[{i, j}] = std::round(dist(i, j) * 1000.0) / 10.0;  // metres / 100

  if (spec.ground_truth_graph.size() != 0) {
    out.ground_truth_graph = spec.ground_truth_graph;
  } else {
    std::vector<std::pair<Index, Index>> edges;
    MatrixXd g = MatrixXd::Zero(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (link(i, j)) {
          g(i, j) = weights.uniform(0.5, 1.0);
          edges.emplace_back(i, j);
        }
    if (spec.negative_edge_fraction > 0) {
      const auto count = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(spec.negative_edge_fraction * static_cast<double>(edges.size()))));
      weights.shuffle(edges);
      for (std::size_t e = 0; e < count && e < edges.size(); ++e) g(edges[e].first, edges[e].second) *= -1.0;
    }
    for (Index i = 0; i < n; ++i) {
      const double s = g.row(i).cwiseAbs().sum();
      if (s > 0) g.row(i) /= s;
    }
    out.ground_truth_graph = g;
  }
  const MatrixXd propagation = spec.rho * out.ground_truth_graph;
  out.spectral_radius = spectral_radius(propagation);
  if (!(out.spectral_radius < 1.0))
    throw DataError("synth: spectral radius of rho * G_true is " + std::to_string(out.spectral_radius) +
                    " (must be < 1 for a stable process)");

  // Baseline level and daily phase vary smoothly over the plane, so nearby
  // roads carry similar daily profiles.
  auto smooth_field = [&] {
    const double kx = signal.uniform(0.2, 0.5), ky = signal.uniform(0.2, 0.5);
    const double ox = signal.uniform(0.0, 2.0 * std::numbers::pi), oy = signal.uniform(0.0, 2.0 * std::numbers::pi);
    return [=](double x, double y) { return 0.5 * (std::sin(kx * x + ox) + std::cos(ky * y + oy)); };
  };
  const auto level = smooth_field();
  const auto shift = smooth_field();
  VectorXd baseline(n), phase(n);
  for (Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    baseline(i) = 200.0 + 100.0 * level(px[k], py[k]);
    phase(i) = 0.5 * shift(px[k], py[k]);
  }
  const Index steps = spec.days * kStepsPerDay;
  TrafficTensor& flow = out.flow;
  flow.values.assign(1, MatrixXd(n, steps));
  flow.feature_names = {"flow"};
  flow.interval_minutes = 5;
  for (Index i = 0; i < n; ++i) flow.node_ids.push_back(std::to_string(i));

  VectorXd d = VectorXd::Zero(n);
  auto advance = [&] {
    VectorXd next = propagation * d;
    if (spec.noise_std > 0)
      for (Index i = 0; i < n; ++i) next(i) += spec.noise_std * signal.normal();
    d = next.unaryExpr([&](double v) { return spec.saturation * std::tanh(v / spec.saturation); });
  };
  if (spec.noise_std > 0)
    for (Index t = 0; t < spec.burn_in; ++t) advance();
  for (Index t = 0; t < steps; ++t) {
    const double day_phase = 2.0 * std::numbers::pi * static_cast<double>(t % kStepsPerDay) / kStepsPerDay;
    for (Index i = 0; i < n; ++i)
      flow.values[0](i, t) = baseline(i) * (1.0 + spec.daily_amplitude * std::sin(day_phase + phase(i))) + d(i);
    flow.time_minutes.push_back(5.0 * static_cast<double>(t));
    advance();
  }
  return out;
}

void write_synthetic(const std::filesystem::path& dir, const SyntheticSpec& spec, const SyntheticData& data) {
  std::filesystem::create_directories(dir);
  save_traffic_csv(dir / "flow.csv", data.flow);
  save_distance_csv(dir / "distances.csv", data.distances);
  save_node_ids(dir / "node_ids.txt", data.flow.node_ids);
  save_matrix_csv(dir / "ground_truth_graph.csv", data.ground_truth_graph);
  Index negatives = (data.ground_truth_graph.array() < 0).count();
  nlohmann::json j = {
      {"n_nodes", spec.n_nodes},
      {"days", spec.days},
      {"steps", data.flow.num_steps()},
      {"interval_minutes", data.flow.interval_minutes},
      {"daily_amplitude", spec.daily_amplitude},
      {"noise_std", spec.noise_std},
      {"negative_edge_fraction", spec.negative_edge_fraction},
      {"negative_edges", negatives},
      {"seed", spec.seed},
      {"rho", spec.rho},
      {"saturation", spec.saturation},
      {"neighbors", spec.neighbors},
      {"burn_in", spec.burn_in},
      {"spectral_radius", data.spectral_radius},
  };
  std::ofstream out(dir / "synth.json", std::ios::binary);
  if (!out) throw DataError("cannot write " + (dir / "synth.json").string());
  out << j.dump(2) << "\n";
}

}  // namespace bgcn
