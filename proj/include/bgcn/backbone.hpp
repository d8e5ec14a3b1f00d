#pragma once

#include "bgcn/bgcn.hpp"
#include "bgcn/common.hpp"
#include "bgcn/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bgcn {

// Where the per-layer graph comes from.
//   bayesian:  Dropout(constant + phi), phi learnable
//   adaptive:  SoftMax(ReLU(E1 E2^T)), E1/E2 learnable (attention baseline)
//   heuristic: the fixed constant adjacency (plain GCN baseline)
enum class GraphMode { bayesian, adaptive, heuristic };

// Which signal feeds each layer's skip connection: the gated TCN output
// (Graph WaveNet layout) or the graph convolution output.
enum class SkipSource { tcn, graph };

const char* to_string(GraphMode mode);
const char* to_string(SkipSource source);
GraphMode parse_graph_mode(const std::string& text);
SkipSource parse_skip_source(const std::string& text);

struct BackboneConfig {
  Index num_nodes = 0;
  int layers = 8;
  int kernel_size = 2;
  std::vector<int> dilations{1, 2, 1, 2, 1, 2, 1, 2};
  int residual_channels = 32;
  int skip_channels = 256;
  int end_channels = 512;
  int t_in = 12;
  int horizon = 12;
  int features_in = 1;
  int features_out = 1;

  GraphMode graph_mode = GraphMode::bayesian;
  SkipSource skip_source = SkipSource::tcn;
  double dropout_rate = 0.5;
  bool learn_phi = true;
  double phi_init = 1e-6;
  int adaptive_dim = 10;

  // 1 + (kernel - 1) * sum(dilations).
  int receptive_field() const;
  // Time steps fed to the first layer: inputs are left-padded with zeros up
  // to the receptive field.
  int padded_length() const { return std::max(t_in, receptive_field()); }
  // True when layer `l` owns a graph convolution (in tcn-skip mode the last
  // layer's graph output would never be consumed, so it is omitted).
  bool layer_has_graph(int layer) const {
    return skip_source == SkipSource::graph || layer + 1 < layers;
  }
  void validate() const;
};

// Closed-form parameter count.
Index count_parameters(const BackboneConfig& config);

struct Parameter {
  std::string name;
  MatrixXd value;
  bool trainable = true;
};

// Supplies the dropout mask for each layer's graph realization.
class GraphSampler {
 public:
  // Deterministic expectation path (no dropout).
  static GraphSampler expectation() { return GraphSampler(); }
  // A fresh inverted-dropout mask for every request.
  static GraphSampler fresh(Rng& rng) {
    GraphSampler s;
    s.rng_ = &rng;
    return s;
  }
  // Replays the given masks (one per layer); used for epoch-scoped sampling
  // and for gradient checks under a frozen mask.
  static GraphSampler fixed(std::vector<MatrixXd> masks) {
    GraphSampler s;
    s.masks_ = std::move(masks);
    s.replay_ = true;
    return s;
  }

  bool stochastic() const { return rng_ != nullptr || replay_; }
  // Returns the mask for `layer`; an empty matrix means "no dropout".
  MatrixXd mask(int layer, Index num_nodes, double rate);

 private:
  GraphSampler() = default;
  Rng* rng_ = nullptr;
  std::vector<MatrixXd> masks_;
  bool replay_ = false;
};

struct GatedTcnOutput {
  MatrixXd filter;  // tanh(conv_a(x))
  MatrixXd gate;    // sigmoid(conv_b(x))
  MatrixXd gated;   // filter .* gate
  Index steps_out = 0;
};

// Causal dilated convolution pair combined as tanh(conv_a) .* sigmoid(conv_b).
// `input` is C_in x (T * N); conv weights are C_out x (kernel * C_in) with
// tap k occupying columns [k * C_in, (k + 1) * C_in) and reading time step
// t + k * dilation. Output length T' = T - dilation * (kernel - 1).
GatedTcnOutput gated_tcn(const MatrixXd& input, Index num_nodes, int kernel, int dilation, const MatrixXd& filter_w,
                         const MatrixXd& filter_b, const MatrixXd& gate_w, const MatrixXd& gate_b);

// Draws one mask per graph layer for a model config.
std::vector<MatrixXd> draw_layer_masks(const BackboneConfig& config, Rng& rng);

// Graph-WaveNet-style spatio-temporal network with Bayesian graph layers.
// One sample at a time: inputs are D_in x (t_in * N) (column t * N + n),
// outputs (horizon * D_out) x N (row h * D_out + d).
class ForecastModel {
 public:
  ForecastModel(BackboneConfig config, MatrixXd constant_adjacency, std::uint64_t seed);

  struct LayerTrace {
    MatrixXd input;   // C x (T * N)
    MatrixXd filter;  // tanh branch, C x (T' * N)
    MatrixXd gate;    // sigmoid branch
    MatrixXd gated;   // filter .* gate
    MatrixXd graph_in;   // W_g * gated
    MatrixXd graph_out;  // graph_in per step times G^T, plus bias
    MatrixXd graph;      // sampled N x N graph for this layer
    MatrixXd mask;       // dropout mask (empty when none)
    Index steps_out = 0;
  };

  struct Trace {
    MatrixXd padded_input;
    std::vector<LayerTrace> layers;
    MatrixXd skip_sum;
    MatrixXd end_hidden_pre;
    MatrixXd output;
    MatrixXd adaptive_graph;  // adaptive mode only
  };

  const BackboneConfig& config() const { return config_; }
  const MatrixXd& constant_adjacency() const { return constant_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  const Parameter& parameter(const std::string& name) const;
  Parameter& parameter(const std::string& name);
  Index parameter_count() const;

  // Learnable adjacency (zero matrix outside bayesian mode).
  MatrixXd phi() const;
  // The graph used on the deterministic evaluation path.
  MatrixXd expected_graph() const;
  BayesianGraph<double> bayesian_graph() const;

  MatrixXd forward(const MatrixXd& input, bool training, GraphSampler& sampler) const;
  Trace forward_trace(const MatrixXd& input, bool training, GraphSampler& sampler) const;
  // Accumulates dLoss/dparameters into `grads` (same order and shapes as
  // parameters()).
  void backward(const Trace& trace, const MatrixXd& grad_output, std::vector<MatrixXd>& grads) const;
  std::vector<MatrixXd> zero_gradients() const;

 private:
  Index add_param(const std::string& name, MatrixXd value, bool trainable = true);
  MatrixXd uniform_fan_in(Index rows, Index cols, Index fan_in, Rng& rng) const;
  void check_input(const MatrixXd& input) const;

  BackboneConfig config_;
  MatrixXd constant_;
  std::uint64_t seed_;
  std::vector<Parameter> params_;

  struct LayerSlots {
    Index filter_w, filter_b, gate_w, gate_b;
    Index graph_w = -1, graph_b = -1;
    Index skip_w, skip_b;
  };
  Index start_w_ = 0, start_b_ = 0;
  std::vector<LayerSlots> layer_slots_;
  Index end1_w_ = 0, end1_b_ = 0, end2_w_ = 0, end2_b_ = 0;
  Index phi_ = -1, e1_ = -1, e2_ = -1;
};

struct McPrediction {
  MatrixXd mean;
  std::vector<MatrixXd> samples;
};

// Averages S stochastic forward passes (dropout active in graph layers only).
McPrediction mc_predict(const ForecastModel& model, const MatrixXd& input, int samples, Rng& rng);

}  // namespace bgcn
