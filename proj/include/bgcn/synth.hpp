#pragma once

#include "bgcn/traffic_data.hpp"

#include <cstdint>
#include <filesystem>

namespace bgcn {

inline constexpr Index kStepsPerDay = 288;

// Synthetic road network with linear graph diffusion on top of a daily cycle:
//   x_t     = baseline + amplitude * seasonal(t) + d_t
//   d_{t+1} = saturation(rho * G_true * d_t + noise_t)
// With noise_std = 0 the disturbance stays at zero and the series is exactly
// daily-periodic.
struct SyntheticSpec {
  Index n_nodes = 20;
  Index days = 14;
  MatrixXd ground_truth_graph;  // empty: generated from the seed
  double daily_amplitude = 0.4;  // relative to each node's baseline
  double noise_std = 10.0;
  double negative_edge_fraction = 0.2;
  std::uint64_t seed = 0;
  double rho = 0.95;
  double saturation = 80.0;  // tanh saturation scale of the disturbance
  int neighbors = 3;         // nearest neighbours per node in the road topology
  Index burn_in = kStepsPerDay;

  void validate() const;
};

struct SyntheticData {
  TrafficTensor flow;
  DistanceMap distances;
  MatrixXd ground_truth_graph;
  double spectral_radius = 0.0;  // of rho * G_true
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Writes flow.csv, distances.csv, node_ids.txt, ground_truth_graph.csv and
// synth.json into `dir`.
void write_synthetic(const std::filesystem::path& dir, const SyntheticSpec& spec, const SyntheticData& data);

}  // namespace bgcn
