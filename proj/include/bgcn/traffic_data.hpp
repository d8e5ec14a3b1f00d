#pragma once

#include "bgcn/common.hpp"

#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace bgcn {

// Directed road distances keyed by (from, to) node index.
using DistanceMap = std::map<std::pair<Index, Index>, double>;

struct RoadGraph {
  std::vector<std::string> node_ids;
  DistanceMap distances;
  MatrixXd observed_adjacency;
  double xi = 0.0;
  double epsilon = 0.1;

  Index num_nodes() const { return static_cast<Index>(node_ids.size()); }
};

// Population standard deviation of all finite off-diagonal distances.
double distance_bandwidth(const DistanceMap& distances);

// Gaussian-kernel adjacency with thresholding:
//   A(i,j) = exp(-d_ij^2 / xi^2) if i != j and the value >= epsilon, else 0.
// Pairs with no recorded distance get 0. Throws DegenerateInputError when
// xi == 0.
template <typename Scalar = double>
Matrix<Scalar> construct_observed_adjacency(const DistanceMap& distances, Index num_nodes,
                                            Scalar epsilon = Scalar(0.1), double* xi_out = nullptr) {
  const double xi = distance_bandwidth(distances);
  if (xi_out) *xi_out = xi;
  Matrix<Scalar> adjacency = Matrix<Scalar>::Zero(num_nodes, num_nodes);
  for (const auto& [edge, d] : distances) {
    const auto [i, j] = edge;
    if (i == j || !std::isfinite(d)) continue;
    if (i < 0 || j < 0 || i >= num_nodes || j >= num_nodes)
      throw DataError("distance entry (" + std::to_string(i) + "," + std::to_string(j) +
                      ") references a node outside [0," + std::to_string(num_nodes) + ")");
    const Scalar weight = static_cast<Scalar>(std::exp(-(d * d) / (xi * xi)));
    adjacency(i, j) = weight >= epsilon ? weight : Scalar(0);
  }
  return adjacency;
}

// N roads x T steps x D features, stored as one N x T matrix per feature.
// Missing observations are NaN.
struct TrafficTensor {
  std::vector<MatrixXd> values;
  std::vector<double> time_minutes;
  int interval_minutes = 5;
  std::vector<std::string> node_ids;
  std::vector<std::string> feature_names;
  VectorXd mean;
  VectorXd std;
  bool normalized = false;

  Index num_nodes() const { return values.empty() ? 0 : values.front().rows(); }
  Index num_steps() const { return values.empty() ? 0 : values.front().cols(); }
  Index num_features() const { return static_cast<Index>(values.size()); }

  // Validates that every feature matrix agrees on N and T.
  void check_shape() const;

  // Undo the z-score transform for values laid out with feature index
  // `feature`.
  double denormalize(double x, Index feature) const {
    return normalized ? x * std(feature) + mean(feature) : x;
  }
  TrafficTensor inverse_transform() const;
};

// Removes every time step where any node/feature is missing and returns the
// dropped time stamps (in minutes).
std::vector<double> drop_missing_steps(TrafficTensor& data);

// Z-score normalization with statistics from the first
// floor(train_fraction * T) steps. Population standard deviation.
TrafficTensor zscore_fit_transform(const TrafficTensor& raw, double train_fraction);

enum class Split { train, val, test };

const char* split_name(Split split);

// Sliding windows (stride 1) over a shared tensor. Inputs are laid out as
// D x (t_in * N) with column t * N + n; targets as (horizon * D) x N with row
// h * D + d.
struct WindowedDataset {
  std::shared_ptr<const TrafficTensor> data;
  std::vector<Index> starts;
  Index t_in = 12;
  Index horizon = 12;
  Split split = Split::train;

  Index size() const { return static_cast<Index>(starts.size()); }
  MatrixXd input(Index window) const;
  MatrixXd target(Index window) const;
  // Time stamps of the forecast steps of one window.
  std::vector<double> target_times(Index window) const;
};

struct SplitRatio {
  double train = 6.0;
  double val = 2.0;
  double test = 2.0;
};

struct WindowSplits {
  WindowedDataset train;
  WindowedDataset val;
  WindowedDataset test;
  // Raw time-index boundaries: train [0, b0), val [b0, b1), test [b1, T).
  Index boundary_train_val = 0;
  Index boundary_val_test = 0;
};

// Number of complete windows fitting in a segment of `length` steps.
inline Index window_count(Index length, Index t_in, Index horizon) {
  const Index n = length - t_in - horizon + 1;
  return n > 0 ? n : 0;
}

WindowSplits make_windows(std::shared_ptr<const TrafficTensor> data, Index t_in, Index horizon,
                          SplitRatio ratio = {});

// File formats --------------------------------------------------------------

// `time,<node_id>,...` with one row per time step; one file per feature.
TrafficTensor load_traffic_csv(const std::filesystem::path& path);
TrafficTensor load_traffic_csvs(const std::vector<std::filesystem::path>& paths);
void save_traffic_csv(const std::filesystem::path& path, const TrafficTensor& data, Index feature = 0);

// Binary container: "BGTT" magic, u32 version, u64 N, T, D, then the time
// stamps and values (feature-major, then time, then node) as little-endian
// doubles, followed by the node and feature names.
TrafficTensor load_traffic_binary(const std::filesystem::path& path);
void save_traffic_binary(const std::filesystem::path& path, const TrafficTensor& data);

// `from,to,cost` with integer node indices.
DistanceMap load_distance_csv(const std::filesystem::path& path);
void save_distance_csv(const std::filesystem::path& path, const DistanceMap& distances);

// One node id per line.
std::vector<std::string> load_node_ids(const std::filesystem::path& path);
void save_node_ids(const std::filesystem::path& path, const std::vector<std::string>& ids);

// Dense matrix as plain CSV (no header), full round-trip precision.
MatrixXd load_matrix_csv(const std::filesystem::path& path);
void save_matrix_csv(const std::filesystem::path& path, const MatrixXd& m);

}  // namespace bgcn
