#include "bgcn/backbone.hpp"

#include "bgcn/graph_ops.hpp"

#include <cmath>
#include <numeric>

namespace bgcn {

const char* to_string(GraphMode mode) {
  switch (mode) {
    case GraphMode::bayesian: return "bayesian";
    case GraphMode::adaptive: return "adaptive";
    case GraphMode::heuristic: return "heuristic";
  }
  return "?";
}

const char* to_string(SkipSource source) { return source == SkipSource::tcn ? "tcn" : "graph"; }

GraphMode parse_graph_mode(const std::string& text) {
  if (text == "bayesian") return GraphMode::bayesian;
  if (text == "adaptive") return GraphMode::adaptive;
  if (text == "heuristic") return GraphMode::heuristic;
  throw UsageError("unknown graph mode '" + text + "' (bayesian|adaptive|heuristic)");
}

SkipSource parse_skip_source(const std::string& text) {
  if (text == "tcn") return SkipSource::tcn;
  if (text == "graph") return SkipSource::graph;
  throw UsageError("unknown skip source '" + text + "' (tcn|graph)");
}

int BackboneConfig::receptive_field() const {
  return 1 + (kernel_size - 1) * std::accumulate(dilations.begin(), dilations.end(), 0);
}

void BackboneConfig::validate() const {
  if (num_nodes < 1) throw UsageError("backbone: num_nodes must be positive");
  if (layers < 1) throw UsageError("backbone: layers must be positive");
  if (kernel_size < 1) throw UsageError("backbone: kernel_size must be positive");
  if (static_cast<int>(dilations.size()) != layers)
    throw UsageError("backbone: " + std::to_string(dilations.size()) + " dilations given for " +
                     std::to_string(layers) + " layers");
  for (int d : dilations)
    if (d < 1) throw UsageError("backbone: dilations must be positive");
  if (residual_channels < 1 || skip_channels < 1 || end_channels < 1)
    throw UsageError("backbone: channel counts must be positive");
  if (t_in < 1 || horizon < 1 || features_in < 1 || features_out < 1)
    throw UsageError("backbone: t_in, horizon and feature counts must be positive");
  if (receptive_field() < t_in)
    throw UsageError("backbone: receptive field " + std::to_string(receptive_field()) + " is shorter than t_in " +
                     std::to_string(t_in));
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw UsageError("backbone: dropout_rate must lie in [0, 1)");
  if (graph_mode == GraphMode::adaptive && adaptive_dim < 1)
    throw UsageError("backbone: adaptive_dim must be positive");
}

Index count_parameters(const BackboneConfig& config) {
  config.validate();
  const Index c = config.residual_channels;
  const Index s = config.skip_channels;
  const Index e = config.end_channels;
  const Index k = config.kernel_size;
  const Index out = static_cast<Index>(config.horizon) * config.features_out;
  Index total = c * config.features_in + c;  // input 1x1 conv
  for (int l = 0; l < config.layers; ++l) {
    total += 2 * (c * k * c + c);  // filter and gate convolutions
    if (config.layer_has_graph(l)) total += c * c + c;
    total += s * c + s;  // skip 1x1 conv
  }
  total += e * s + e;      // end conv 1
  total += out * e + out;  // end conv 2
  const Index n = config.num_nodes;
  if (config.graph_mode == GraphMode::bayesian) total += n * n;
  if (config.graph_mode == GraphMode::adaptive) total += 2 * n * config.adaptive_dim;
  return total;
}

MatrixXd GraphSampler::mask(int layer, Index num_nodes, double rate) {
  if (replay_) {
    if (layer < static_cast<int>(masks_.size())) return masks_[static_cast<std::size_t>(layer)];
    return MatrixXd();
  }
  if (rng_ && rate > 0.0) return dropout_mask<double>(num_nodes, num_nodes, rate, *rng_);
  return MatrixXd();
}

std::vector<MatrixXd> draw_layer_masks(const BackboneConfig& config, Rng& rng) {
  std::vector<MatrixXd> masks;
  for (int l = 0; l < config.layers; ++l) {
    if (config.graph_mode == GraphMode::bayesian && config.dropout_rate > 0.0 && config.layer_has_graph(l))
      masks.push_back(dropout_mask<double>(config.num_nodes, config.num_nodes, config.dropout_rate, rng));
    else
      masks.emplace_back();
  }
  return masks;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Dilated causal convolution over C x (T * N) blocks.
MatrixXd dilated_conv(const MatrixXd& input, Index num_nodes, int kernel, int dilation, Index steps_out,
                      const MatrixXd& weights, const MatrixXd& bias) {
  const Index c_in = input.rows();
  MatrixXd out = bias * Eigen::RowVectorXd::Ones(steps_out * num_nodes);
  for (int k = 0; k < kernel; ++k)
    out.noalias() += weights.middleCols(k * c_in, c_in) *
                     input.middleCols(static_cast<Index>(k) * dilation * num_nodes, steps_out * num_nodes);
  return out;
}

void dilated_conv_backward(const MatrixXd& input, Index num_nodes, int kernel, int dilation, Index steps_out,
                           const MatrixXd& weights, const MatrixXd& grad_out, MatrixXd& grad_input,
                           MatrixXd& grad_weights, MatrixXd& grad_bias) {
  const Index c_in = input.rows();
  grad_bias += grad_out.rowwise().sum();
  for (int k = 0; k < kernel; ++k) {
    const Index offset = static_cast<Index>(k) * dilation * num_nodes;
    grad_weights.middleCols(k * c_in, c_in).noalias() +=
        grad_out * input.middleCols(offset, steps_out * num_nodes).transpose();
    grad_input.middleCols(offset, steps_out * num_nodes).noalias() +=
        weights.middleCols(k * c_in, c_in).transpose() * grad_out;
  }
}

}  // namespace

GatedTcnOutput gated_tcn(const MatrixXd& input, Index num_nodes, int kernel, int dilation, const MatrixXd& filter_w,
                         const MatrixXd& filter_b, const MatrixXd& gate_w, const MatrixXd& gate_b) {
  if (num_nodes < 1 || input.cols() % num_nodes != 0)
    throw ShapeError("gated tcn: input width " + std::to_string(input.cols()) + " is not a multiple of " +
                     std::to_string(num_nodes) + " nodes");
  const Index steps = input.cols() / num_nodes;
  const Index span = static_cast<Index>(dilation) * (kernel - 1);
  if (steps <= span)
    throw ShapeError("gated tcn: " + std::to_string(steps) + " steps is shorter than the receptive field " +
                     std::to_string(span + 1));
  if (filter_w.cols() != kernel * input.rows() || gate_w.cols() != kernel * input.rows())
    throw ShapeError("gated tcn: weights " + shape_string(filter_w.rows(), filter_w.cols()) + " do not match " +
                     std::to_string(input.rows()) + " input channels with kernel " + std::to_string(kernel));
  GatedTcnOutput out;
  out.steps_out = steps - span;
  out.filter = dilated_conv(input, num_nodes, kernel, dilation, out.steps_out, filter_w, filter_b).array().tanh();
  out.gate = dilated_conv(input, num_nodes, kernel, dilation, out.steps_out, gate_w, gate_b).unaryExpr(&sigmoid);
  out.gated = out.filter.cwiseProduct(out.gate);
  return out;
}

ForecastModel::ForecastModel(BackboneConfig config, MatrixXd constant_adjacency, std::uint64_t seed)
    : config_(std::move(config)), constant_(std::move(constant_adjacency)), seed_(seed) {
  config_.validate();
  const Index n = config_.num_nodes;
  if (constant_.rows() != n || constant_.cols() != n)
    throw ShapeError("constant adjacency is " + shape_string(constant_.rows(), constant_.cols()) + ", expected " +
                     shape_string(n, n));
  Rng rng(seed);
  const Index c = config_.residual_channels;
  const Index s = config_.skip_channels;
  const Index e = config_.end_channels;
  const Index k = config_.kernel_size;
  const Index out = static_cast<Index>(config_.horizon) * config_.features_out;

  start_w_ = add_param("start.w", uniform_fan_in(c, config_.features_in, config_.features_in, rng));
  start_b_ = add_param("start.b", uniform_fan_in(c, 1, config_.features_in, rng));
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    LayerSlots slots{};
    slots.filter_w = add_param(p + "filter.w", uniform_fan_in(c, k * c, k * c, rng));
    slots.filter_b = add_param(p + "filter.b", uniform_fan_in(c, 1, k * c, rng));
    slots.gate_w = add_param(p + "gate.w", uniform_fan_in(c, k * c, k * c, rng));
    slots.gate_b = add_param(p + "gate.b", uniform_fan_in(c, 1, k * c, rng));
    if (config_.layer_has_graph(l)) {
      slots.graph_w = add_param(p + "graph.w", uniform_fan_in(c, c, c, rng));
      slots.graph_b = add_param(p + "graph.b", uniform_fan_in(c, 1, c, rng));
    }
    slots.skip_w = add_param(p + "skip.w", uniform_fan_in(s, c, c, rng));
    slots.skip_b = add_param(p + "skip.b", uniform_fan_in(s, 1, c, rng));
    layer_slots_.push_back(slots);
  }
  end1_w_ = add_param("end1.w", uniform_fan_in(e, s, s, rng));
  end1_b_ = add_param("end1.b", uniform_fan_in(e, 1, s, rng));
  end2_w_ = add_param("end2.w", uniform_fan_in(out, e, e, rng));
  end2_b_ = add_param("end2.b", uniform_fan_in(out, 1, e, rng));

  if (config_.graph_mode == GraphMode::bayesian) {
    if (config_.learn_phi)
      phi_ = add_param("phi", MatrixXd::Constant(n, n, config_.phi_init));
    else
      phi_ = add_param("phi", MatrixXd::Zero(n, n), false);
  } else if (config_.graph_mode == GraphMode::adaptive) {
    MatrixXd e1(n, config_.adaptive_dim), e2(n, config_.adaptive_dim);
    for (Index j = 0; j < e1.cols(); ++j)
      for (Index i = 0; i < n; ++i) e1(i, j) = rng.normal();
    for (Index j = 0; j < e2.cols(); ++j)
      for (Index i = 0; i < n; ++i) e2(i, j) = rng.normal();
    e1_ = add_param("adaptive.e1", std::move(e1));
    e2_ = add_param("adaptive.e2", std::move(e2));
  }
}

Index ForecastModel::add_param(const std::string& name, MatrixXd value, bool trainable) {
  params_.push_back(Parameter{name, std::move(value), trainable});
  return static_cast<Index>(params_.size()) - 1;
}

MatrixXd ForecastModel::uniform_fan_in(Index rows, Index cols, Index fan_in, Rng& rng) const {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

const Parameter& ForecastModel::parameter(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p;
  throw UsageError("no parameter named '" + name + "'");
}

Parameter& ForecastModel::parameter(const std::string& name) {
  return const_cast<Parameter&>(std::as_const(*this).parameter(name));
}

Index ForecastModel::parameter_count() const {
  Index total = 0;
  for (const auto& p : params_) total += p.value.size();
  return total;
}

MatrixXd ForecastModel::phi() const {
  if (phi_ < 0) return MatrixXd::Zero(config_.num_nodes, config_.num_nodes);
  return params_[static_cast<std::size_t>(phi_)].value;
}

MatrixXd ForecastModel::expected_graph() const {
  switch (config_.graph_mode) {
    case GraphMode::bayesian: return constant_ + phi();
    case GraphMode::adaptive:
      return adaptive_adjacency(params_[static_cast<std::size_t>(e1_)].value, params_[static_cast<std::size_t>(e2_)].value);
    case GraphMode::heuristic: return constant_;
  }
  return constant_;
}

BayesianGraph<double> ForecastModel::bayesian_graph() const {
  BayesianGraph<double> g;
  g.constant = constant_;
  g.phi = phi();
  g.dropout_rate = config_.dropout_rate;
  g.rng_seed = seed_;
  return g;
}

std::vector<MatrixXd> ForecastModel::zero_gradients() const {
  std::vector<MatrixXd> grads;
  grads.reserve(params_.size());
  for (const auto& p : params_) grads.push_back(MatrixXd::Zero(p.value.rows(), p.value.cols()));
  return grads;
}

void ForecastModel::check_input(const MatrixXd& input) const {
  const Index expected_cols = static_cast<Index>(config_.t_in) * config_.num_nodes;
  if (input.rows() != config_.features_in || input.cols() != expected_cols)
    throw ShapeError("model input is " + shape_string(input.rows(), input.cols()) + ", expected " +
                     shape_string(config_.features_in, expected_cols));
}

MatrixXd ForecastModel::forward(const MatrixXd& input, bool training, GraphSampler& sampler) const {
  return forward_trace(input, training, sampler).output;
}

ForecastModel::Trace ForecastModel::forward_trace(const MatrixXd& input, bool training, GraphSampler& sampler) const {
  check_input(input);
  const Index n = config_.num_nodes;
  const auto& P = params_;
  auto value = [&](Index slot) -> const MatrixXd& { return P[static_cast<std::size_t>(slot)].value; };

  Trace trace;
  const Index padded = config_.padded_length();
  trace.padded_input = MatrixXd::Zero(config_.features_in, padded * n);
  trace.padded_input.rightCols(input.cols()) = input;

  if (config_.graph_mode == GraphMode::adaptive) trace.adaptive_graph = adaptive_adjacency(value(e1_), value(e2_));
  const MatrixXd mean_graph = config_.graph_mode == GraphMode::bayesian ? MatrixXd(constant_ + value(phi_)) : MatrixXd();

  MatrixXd hidden = value(start_w_) * trace.padded_input;
  hidden.colwise() += value(start_b_).col(0);
  trace.skip_sum = MatrixXd::Zero(config_.skip_channels, n);

  for (int l = 0; l < config_.layers; ++l) {
    const LayerSlots& slots = layer_slots_[static_cast<std::size_t>(l)];
    const int dilation = config_.dilations[static_cast<std::size_t>(l)];
    LayerTrace lt;
    lt.input = hidden;
    auto tcn = gated_tcn(hidden, n, config_.kernel_size, dilation, value(slots.filter_w), value(slots.filter_b),
                         value(slots.gate_w), value(slots.gate_b));
    lt.filter = std::move(tcn.filter);
    lt.gate = std::move(tcn.gate);
    lt.gated = std::move(tcn.gated);
    lt.steps_out = tcn.steps_out;
    const Index width = lt.steps_out * n;

    if (config_.layer_has_graph(l)) {
      switch (config_.graph_mode) {
        case GraphMode::bayesian:
          lt.mask = training ? sampler.mask(l, n, config_.dropout_rate) : MatrixXd();
          lt.graph = lt.mask.size() ? MatrixXd(mean_graph.cwiseProduct(lt.mask)) : mean_graph;
          break;
        case GraphMode::adaptive: lt.graph = trace.adaptive_graph; break;
        case GraphMode::heuristic: lt.graph = constant_; break;
      }
      lt.graph_in = value(slots.graph_w) * lt.gated;
      lt.graph_out.resize(lt.graph_in.rows(), width);
      const MatrixXd graph_t = lt.graph.transpose();
      for (Index t = 0; t < lt.steps_out; ++t)
        lt.graph_out.middleCols(t * n, n).noalias() = lt.graph_in.middleCols(t * n, n) * graph_t;
      lt.graph_out.colwise() += value(slots.graph_b).col(0);
    }

    const MatrixXd& skip_in = config_.skip_source == SkipSource::tcn ? lt.gated : lt.graph_out;
    trace.skip_sum.noalias() += value(slots.skip_w) * skip_in.rightCols(n);
    trace.skip_sum.colwise() += value(slots.skip_b).col(0);

    if (config_.layer_has_graph(l)) hidden = lt.graph_out + lt.input.rightCols(width);
    trace.layers.push_back(std::move(lt));
  }

  trace.end_hidden_pre = value(end1_w_) * trace.skip_sum.cwiseMax(0.0);
  trace.end_hidden_pre.colwise() += value(end1_b_).col(0);
  trace.output = value(end2_w_) * trace.end_hidden_pre.cwiseMax(0.0);
  trace.output.colwise() += value(end2_b_).col(0);
  return trace;
}

void ForecastModel::backward(const Trace& trace, const MatrixXd& grad_output, std::vector<MatrixXd>& grads) const {
  const Index n = config_.num_nodes;
  auto value = [&](Index slot) -> const MatrixXd& { return params_[static_cast<std::size_t>(slot)].value; };
  auto grad = [&](Index slot) -> MatrixXd& { return grads[static_cast<std::size_t>(slot)]; };
  if (grads.size() != params_.size()) throw ShapeError("gradient buffer does not match parameter list");
  if (grad_output.rows() != trace.output.rows() || grad_output.cols() != trace.output.cols())
    throw ShapeError("output gradient shape mismatch");

  const MatrixXd end_hidden = trace.end_hidden_pre.cwiseMax(0.0);
  grad(end2_w_).noalias() += grad_output * end_hidden.transpose();
  grad(end2_b_) += grad_output.rowwise().sum();
  MatrixXd grad_end = value(end2_w_).transpose() * grad_output;
  grad_end = (trace.end_hidden_pre.array() > 0.0).select(grad_end, 0.0);
  grad(end1_w_).noalias() += grad_end * trace.skip_sum.cwiseMax(0.0).transpose();
  grad(end1_b_) += grad_end.rowwise().sum();
  MatrixXd grad_skip = value(end1_w_).transpose() * grad_end;
  grad_skip = (trace.skip_sum.array() > 0.0).select(grad_skip, 0.0);

  MatrixXd grad_adaptive;
  if (config_.graph_mode == GraphMode::adaptive) grad_adaptive = MatrixXd::Zero(n, n);

  MatrixXd grad_hidden;  // gradient w.r.t. the current layer's output
  for (int l = config_.layers - 1; l >= 0; --l) {
    const LayerSlots& slots = layer_slots_[static_cast<std::size_t>(l)];
    const LayerTrace& lt = trace.layers[static_cast<std::size_t>(l)];
    const int dilation = config_.dilations[static_cast<std::size_t>(l)];
    const Index width = lt.steps_out * n;
    MatrixXd grad_input = MatrixXd::Zero(lt.input.rows(), lt.input.cols());
    MatrixXd grad_gated = MatrixXd::Zero(lt.gated.rows(), width);

    const MatrixXd& skip_in = config_.skip_source == SkipSource::tcn ? lt.gated : lt.graph_out;
    grad(slots.skip_w).noalias() += grad_skip * skip_in.rightCols(n).transpose();
    grad(slots.skip_b) += grad_skip.rowwise().sum();
    const MatrixXd grad_skip_in = value(slots.skip_w).transpose() * grad_skip;

    if (config_.layer_has_graph(l)) {
      MatrixXd grad_graph_out = grad_hidden.size() ? grad_hidden : MatrixXd::Zero(lt.graph_out.rows(), width);
      if (grad_hidden.size()) grad_input.rightCols(width) += grad_hidden;
      if (config_.skip_source == SkipSource::graph) grad_graph_out.rightCols(n) += grad_skip_in;
      grad(slots.graph_b) += grad_graph_out.rowwise().sum();
      MatrixXd grad_graph_in(lt.graph_in.rows(), width);
      MatrixXd grad_graph = MatrixXd::Zero(n, n);
      for (Index t = 0; t < lt.steps_out; ++t) {
        const auto g_out = grad_graph_out.middleCols(t * n, n);
        grad_graph_in.middleCols(t * n, n).noalias() = g_out * lt.graph;
        grad_graph.noalias() += g_out.transpose() * lt.graph_in.middleCols(t * n, n);
      }
      grad(slots.graph_w).noalias() += grad_graph_in * lt.gated.transpose();
      grad_gated.noalias() += value(slots.graph_w).transpose() * grad_graph_in;
      if (config_.graph_mode == GraphMode::bayesian && params_[static_cast<std::size_t>(phi_)].trainable)
        grad(phi_) += lt.mask.size() ? MatrixXd(grad_graph.cwiseProduct(lt.mask)) : grad_graph;
      if (config_.graph_mode == GraphMode::adaptive) grad_adaptive += grad_graph;
    }
    if (config_.skip_source == SkipSource::tcn) grad_gated.rightCols(n) += grad_skip_in;

    const MatrixXd grad_filter_pre =
        (grad_gated.array() * lt.gate.array() * (1.0 - lt.filter.array().square())).matrix();
    const MatrixXd grad_gate_pre =
        (grad_gated.array() * lt.filter.array() * lt.gate.array() * (1.0 - lt.gate.array())).matrix();
    dilated_conv_backward(lt.input, n, config_.kernel_size, dilation, lt.steps_out, value(slots.filter_w),
                          grad_filter_pre, grad_input, grad(slots.filter_w), grad(slots.filter_b));
    dilated_conv_backward(lt.input, n, config_.kernel_size, dilation, lt.steps_out, value(slots.gate_w),
                          grad_gate_pre, grad_input, grad(slots.gate_w), grad(slots.gate_b));
    grad_hidden = std::move(grad_input);
  }

  grad(start_w_).noalias() += grad_hidden * trace.padded_input.transpose();
  grad(start_b_) += grad_hidden.rowwise().sum();

  if (config_.graph_mode == GraphMode::adaptive) {
    MatrixXd g1, g2;
    adaptive_adjacency_backward<double>(value(e1_), value(e2_), trace.adaptive_graph, grad_adaptive, g1, g2);
    grad(e1_) += g1;
    grad(e2_) += g2;
  }
}

McPrediction mc_predict(const ForecastModel& model, const MatrixXd& input, int samples, Rng& rng) {
  if (samples < 1) throw UsageError("mc_predict: at least one sample is required");
  McPrediction out;
  GraphSampler sampler = GraphSampler::fresh(rng);
  for (int s = 0; s < samples; ++s) out.samples.push_back(model.forward(input, true, sampler));
  out.mean = MatrixXd::Zero(out.samples.front().rows(), out.samples.front().cols());
  for (const auto& s : out.samples) out.mean += s;
  out.mean /= static_cast<double>(samples);
  return out;
}

}  // namespace bgcn
