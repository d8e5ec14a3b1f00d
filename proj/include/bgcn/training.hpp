#pragma once

#include "bgcn/backbone.hpp"
#include "bgcn/metrics.hpp"
#include "bgcn/traffic_data.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace bgcn {

// Epoch scope replays one mask per layer for a whole epoch; batch scope
// draws fresh masks for every forward pass (per layer, per sample).
enum class SampleScope { epoch, batch };

const char* to_string(SampleScope scope);
SampleScope parse_sample_scope(const std::string& text);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 64;
  double lr_init = 1e-3;
  int lr_drop_epoch = 50;
  double lr_after = 1e-4;
  double grad_clip = 0.0;  // global-norm clip; 0 disables
  std::uint64_t seed = 0;
  SampleScope graph_sample_scope = SampleScope::batch;
  int max_batches_per_epoch = 0;  // 0 = full pass over the training split
  int eval_mc_samples = 0;        // 0 = deterministic expectation path
  bool mask_zero = true;          // MAPE masking of zero targets
  bool freeze = false;            // skip parameter updates

  void validate() const;
  // Step schedule over 1-indexed epochs.
  double learning_rate(int epoch) const { return epoch >= lr_drop_epoch ? lr_after : lr_init; }
};

struct EpochRecord {
  int epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;  // normalized MAE
  MetricValues val;         // de-normalized
  double wall_seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_mae = 0.0;
  std::vector<MatrixXd> best_parameters;

  // One JSON object per line; wall time only when requested since it is the
  // one field that is not reproducible.
  std::string to_jsonl(bool include_wall_time = false) const;
};

// Model predictions over a split, de-normalized, with metrics.
MetricReport evaluate_model(const ForecastModel& model, const WindowedDataset& dataset, int mc_samples,
                            std::uint64_t seed, bool mask_zero = true);

// De-normalized prediction for one window (deterministic or MC mean).
MatrixXd predict_window(const ForecastModel& model, const WindowedDataset& dataset, Index window, int mc_samples,
                        Rng& rng);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Optimizes the model's trainable parameters (weights and phi) with Adam
// under the MAE objective on normalized targets.
TrainReport train(ForecastModel& model, const WindowSplits& data, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// Restores a parameter snapshot (as stored in TrainReport::best_parameters).
void load_parameters(ForecastModel& model, const std::vector<MatrixXd>& values);
std::vector<MatrixXd> snapshot_parameters(const ForecastModel& model);

}  // namespace bgcn
