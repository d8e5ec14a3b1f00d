#pragma once

#include "bgcn/backbone.hpp"
#include "bgcn/gvae.hpp"
#include "bgcn/map_graph.hpp"
#include "bgcn/traffic_data.hpp"
#include "bgcn/training.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bgcn {

struct DataConfig {
  std::vector<std::string> features{"flow"};  // one <name>.csv per feature
  double epsilon = 0.1;                       // kernel threshold
  SplitRatio split;
};

// Every tunable of the pipeline. The root seed drives all randomness; the
// per-stage seeds are derived from it.
struct ExperimentConfig {
  DataConfig data;
  GvaeConfig gvae;
  MapGraphConfig map;
  BackboneConfig model;
  TrainConfig train;
  std::uint64_t seed = 0;

  void validate() const;
  std::uint64_t gvae_seed() const;
  std::uint64_t model_seed() const;
  std::uint64_t train_seed() const;
};

// Flat dotted key names, e.g. "train.epochs", "model.dilations", "map.alpha".
const std::vector<std::string>& config_keys();
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const ExperimentConfig& config, const std::string& key);

// `key = value` lines; '#' starts a comment. Unknown keys are errors.
void apply_config_text(ExperimentConfig& config, const std::string& text, const std::string& source = "config");
ExperimentConfig load_config(const std::filesystem::path& path);

// BGCN_<KEY> with dots replaced by underscores, e.g. BGCN_TRAIN_EPOCHS.
std::string env_var_name(const std::string& key);
void apply_env_overrides(ExperimentConfig& config);

// Sorted `key = value` dump that load_config reads back.
std::string dump_config(const ExperimentConfig& config);

}  // namespace bgcn
