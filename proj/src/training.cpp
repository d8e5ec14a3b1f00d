#include "bgcn/training.hpp"

#include "bgcn/adam.hpp"
#include "bgcn/text_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

namespace bgcn {

const char* to_string(SampleScope scope) { return scope == SampleScope::epoch ? "epoch" : "batch"; }

SampleScope parse_sample_scope(const std::string& text) {
  if (text == "epoch") return SampleScope::epoch;
  if (text == "batch") return SampleScope::batch;
  throw UsageError("unknown graph sample scope '" + text + "' (epoch|batch)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw UsageError("train: epochs must be positive");
  if (batch_size < 1) throw UsageError("train: batch_size must be positive");
  if (!(lr_init > 0) || !(lr_after > 0)) throw UsageError("train: learning rates must be positive");
  if (!(lr_after < lr_init)) throw UsageError("train: lr_after must be smaller than lr_init");
  if (lr_drop_epoch < 1 || lr_drop_epoch > epochs) throw UsageError("train: lr_drop_epoch must lie in [1, epochs]");
  if (grad_clip < 0) throw UsageError("train: grad_clip must be nonnegative");
  if (max_batches_per_epoch < 0 || eval_mc_samples < 0) throw UsageError("train: counts must be nonnegative");
}

namespace {

std::string metric_json(const MetricValues& v) {
  std::ostringstream s;
  s << "\"mae\":" << format_double(v.mae) << ",\"rmse\":" << format_double(v.rmse) << ",\"mape\":"
    << (v.mape ? format_double(*v.mape) : std::string("null"));
  return s.str();
}

}  // namespace

std::string TrainReport::to_jsonl(bool include_wall_time) const {
  std::ostringstream s;
  for (const auto& r : epochs) {
    s << "{\"epoch\":" << r.epoch << ",\"lr\":" << format_double(r.learning_rate)
      << ",\"train_loss\":" << format_double(r.train_loss) << ",\"val\":{" << metric_json(r.val) << "}";
    if (include_wall_time) s << ",\"wall_seconds\":" << format_double(r.wall_seconds);
    s << ",\"best\":" << (r.epoch == best_epoch ? "true" : "false") << "}\n";
  }
  return s.str();
}

MatrixXd predict_window(const ForecastModel& model, const WindowedDataset& dataset, Index window, int mc_samples,
                        Rng& rng) {
  const MatrixXd input = dataset.input(window);
  MatrixXd pred;
  if (mc_samples > 0) {
    pred = mc_predict(model, input, mc_samples, rng).mean;
  } else {
    GraphSampler sampler = GraphSampler::expectation();
    pred = model.forward(input, false, sampler);
  }
  const Index dims = dataset.data->num_features();
  for (Index r = 0; r < pred.rows(); ++r)
    for (Index c = 0; c < pred.cols(); ++c) pred(r, c) = dataset.data->denormalize(pred(r, c), r % dims);
  return pred;
}

MetricReport evaluate_model(const ForecastModel& model, const WindowedDataset& dataset, int mc_samples,
                            std::uint64_t seed, bool mask_zero) {
  const Index dims = dataset.data->num_features();
  if (model.config().features_out != dims)
    throw ShapeError("model emits " + std::to_string(model.config().features_out) + " features, data has " +
                     std::to_string(dims));
  MetricAccumulator acc(dataset.horizon, dims, mask_zero);
  Rng rng(seed);
  for (Index w = 0; w < dataset.size(); ++w) {
    const MatrixXd pred = predict_window(model, dataset, w, mc_samples, rng);
    MatrixXd target = dataset.target(w);
    for (Index r = 0; r < target.rows(); ++r)
      for (Index c = 0; c < target.cols(); ++c) target(r, c) = dataset.data->denormalize(target(r, c), r % dims);
    acc.add(pred, target);
  }
  return acc.report();
}

std::vector<MatrixXd> snapshot_parameters(const ForecastModel& model) {
  std::vector<MatrixXd> out;
  for (const auto& p : model.parameters()) out.push_back(p.value);
  return out;
}

void load_parameters(ForecastModel& model, const std::vector<MatrixXd>& values) {
  auto& params = model.parameters();
  if (values.size() != params.size()) throw ShapeError("parameter snapshot does not match the model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (values[i].rows() != params[i].value.rows() || values[i].cols() != params[i].value.cols())
      throw ShapeError("parameter '" + params[i].name + "' has a mismatched shape in the snapshot");
    params[i].value = values[i];
  }
}

TrainReport train(ForecastModel& model, const WindowSplits& data, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  const WindowedDataset& train_set = data.train;
  if (train_set.size() == 0) throw DataError("training split has no windows");
  if (data.val.size() == 0) throw DataError("validation split has no windows");
  const auto& mc = model.config();
  if (train_set.t_in != mc.t_in || train_set.horizon != mc.horizon)
    throw ShapeError("dataset windows (" + std::to_string(train_set.t_in) + " -> " +
                     std::to_string(train_set.horizon) + ") do not match the model (" + std::to_string(mc.t_in) +
                     " -> " + std::to_string(mc.horizon) + ")");

  Rng rng(config.seed);
  Adam adam;
  TrainReport report;
  std::vector<Index> order(static_cast<std::size_t>(train_set.size()));
  std::iota(order.begin(), order.end(), Index{0});
  const Index batch = config.batch_size;
  Index batches = (train_set.size() + batch - 1) / batch;
  if (config.max_batches_per_epoch > 0) batches = std::min<Index>(batches, config.max_batches_per_epoch);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = config.learning_rate(epoch);
    rng.shuffle(order);
    std::vector<MatrixXd> epoch_masks;
    if (config.graph_sample_scope == SampleScope::epoch) epoch_masks = draw_layer_masks(mc, rng);

    double loss_sum = 0.0;
    Index loss_count = 0;
    for (Index b = 0; b < batches; ++b) {
      const Index first = b * batch;
      const Index last = std::min<Index>(first + batch, train_set.size());
      std::vector<MatrixXd> grads = model.zero_gradients();
      const Index out_size = static_cast<Index>(mc.horizon) * mc.features_out * mc.num_nodes;
      const Index batch_elems = (last - first) * out_size;
      const double scale = 1.0 / static_cast<double>(batch_elems);
      double batch_abs = 0.0;
      for (Index i = first; i < last; ++i) {
        const Index w = order[static_cast<std::size_t>(i)];
        GraphSampler sampler = config.graph_sample_scope == SampleScope::epoch ? GraphSampler::fixed(epoch_masks)
                                                                               : GraphSampler::fresh(rng);
        const ForecastModel::Trace trace = model.forward_trace(train_set.input(w), true, sampler);
        const MatrixXd diff = trace.output - train_set.target(w);
        batch_abs += diff.cwiseAbs().sum();
        const MatrixXd grad_out = diff.unaryExpr([scale](double e) { return e > 0 ? scale : (e < 0 ? -scale : 0.0); });
        model.backward(trace, grad_out, grads);
      }
      const double batch_loss = batch_abs / static_cast<double>(batch_elems);
      if (!std::isfinite(batch_loss))
        throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(b + 1));
      loss_sum += batch_abs;
      loss_count += batch_elems;

      if (config.freeze) continue;
      auto& params = model.parameters();
      if (config.grad_clip > 0) {
        double norm_sq = 0.0;
        for (std::size_t p = 0; p < params.size(); ++p)
          if (params[p].trainable) norm_sq += grads[p].squaredNorm();
        const double norm = std::sqrt(norm_sq);
        if (norm > config.grad_clip)
          for (auto& g : grads) g *= config.grad_clip / norm;
      }
      adam.begin_step();
      for (std::size_t p = 0; p < params.size(); ++p)
        if (params[p].trainable) adam.update(p, params[p].value, grads[p], lr);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.learning_rate = lr;
    record.train_loss = loss_sum / static_cast<double>(loss_count);
    record.val = evaluate_model(model, data.val, config.eval_mc_samples, config.seed + 7919u * epoch, config.mask_zero).average;
    if (!std::isfinite(record.val.mae)) throw DivergenceError("non-finite validation MAE at epoch " + std::to_string(epoch));
    record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (report.best_epoch == 0 || record.val.mae < report.best_val_mae) {
      report.best_epoch = epoch;
      report.best_val_mae = record.val.mae;
      report.best_parameters = snapshot_parameters(model);
    }
    report.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return report;
}

}  // namespace bgcn
