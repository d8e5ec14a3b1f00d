#pragma once

#include "bgcn/config.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bgcn {

// Ingested, cleaned, normalized and windowed traffic data plus road graph.
struct PreparedData {
  TrafficTensor raw;  // after dropping missing steps
  std::shared_ptr<const TrafficTensor> data;  // z-scored
  RoadGraph road;
  WindowSplits splits;
  std::vector<double> dropped_times;
  Index train_steps = 0;
};

// Reads <feature>.csv per configured feature, distances.csv and (optionally)
// node_ids.txt from `dir`.
PreparedData prepare_data(const std::filesystem::path& dir, const ExperimentConfig& config);
PreparedData prepare_tensor(TrafficTensor raw, const DistanceMap& distances, const ExperimentConfig& config);

// Observed adjacency -> GVAE embeddings -> Z -> MAP graph -> normalized.
struct ConstantGraph {
  NodeEmbeddings embeddings;
  MatrixXd distances;
  MapGraph map;
  MatrixXd adjacency;  // normalized constant graph used by every layer
};

ConstantGraph infer_constant_graph(const RoadGraph& road, const ExperimentConfig& config);

// Model config for the prepared data: node and feature counts filled in.
BackboneConfig model_config_for(const PreparedData& prepared, const ExperimentConfig& config);

enum class Ablation { full, no_uncertainty, no_phi, no_constant };
const char* to_string(Ablation ablation);
Ablation parse_ablation(const std::string& text);
inline const std::vector<Ablation>& all_ablations() {
  static const std::vector<Ablation> rows{Ablation::full, Ablation::no_uncertainty, Ablation::no_phi,
                                          Ablation::no_constant};
  return rows;
}

struct RunResult {
  std::string name;
  std::optional<std::string> error;  // set when the row failed
  TrainReport report;
  MetricReport val_best;
  MetricReport test_best;
  MetricReport test_final;
  std::vector<MatrixXd> final_parameters;
  std::shared_ptr<ForecastModel> model;  // holds the best-validation parameters
};

// Trains one model on the prepared data and evaluates best and final
// snapshots.
RunResult run_training(const PreparedData& prepared, const MatrixXd& constant, const ExperimentConfig& config,
                       const std::string& name, const EpochCallback& on_epoch = {});

// Applies an ablation: dropout 0, phi frozen at 0, or identity constant graph.
ExperimentConfig ablation_config(const ExperimentConfig& config, Ablation ablation);
MatrixXd ablation_constant(const MatrixXd& constant, Ablation ablation);

// One row per variant; a failing row records its error and the table goes on.
std::vector<RunResult> run_ablation(const PreparedData& prepared, const MatrixXd& constant,
                                    const ExperimentConfig& config, const std::vector<Ablation>& rows,
                                    const EpochCallback& on_epoch = {});

inline const std::vector<double>& default_dropout_grid() {
  static const std::vector<double> grid{0.0, 0.1, 0.3, 0.5, 0.7};
  return grid;
}

std::vector<RunResult> sweep_dropout(const PreparedData& prepared, const MatrixXd& constant,
                                     const ExperimentConfig& config, const std::vector<double>& rates,
                                     const EpochCallback& on_epoch = {});

// Delimited comparison table: one row per result, val and test metrics.
std::string results_csv(const std::vector<RunResult>& results, const std::string& label = "variant");
// Human-readable per-horizon table.
std::string metric_table(const MetricReport& report);

// Binary checkpoint: config, constant graph and every named parameter.
void save_checkpoint(const std::filesystem::path& path, const ForecastModel& model, const ExperimentConfig& config);
struct Checkpoint {
  ExperimentConfig config;
  std::shared_ptr<ForecastModel> model;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace bgcn
