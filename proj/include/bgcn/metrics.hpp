#pragma once

#include "bgcn/common.hpp"
#include "bgcn/traffic_data.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace bgcn {

struct MetricValues {
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> mape;  // percent; nullopt when every target is masked
  Index count = 0;
  Index mape_count = 0;
};

struct MetricReport {
  std::vector<MetricValues> horizons;
  MetricValues average;
  Index masked = 0;  // targets excluded from MAPE
};

// Streaming accumulator over (horizon * features) x M prediction blocks.
class MetricAccumulator {
 public:
  MetricAccumulator(Index horizon, Index features, bool mask_zero = true)
      : horizon_(horizon), features_(features), mask_zero_(mask_zero),
        abs_(horizon, 0.0), sq_(horizon, 0.0), pct_(horizon, 0.0), count_(horizon, 0), pct_count_(horizon, 0) {}

  template <typename DP, typename DT>
  void add(const Eigen::MatrixBase<DP>& pred, const Eigen::MatrixBase<DT>& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
      throw ShapeError("metrics: prediction " + shape_string(pred.rows(), pred.cols()) + " vs target " +
                       shape_string(target.rows(), target.cols()));
    if (pred.rows() != horizon_ * features_)
      throw ShapeError("metrics: expected " + std::to_string(horizon_ * features_) + " rows, got " +
                       std::to_string(pred.rows()));
    if (!pred.allFinite() || !target.allFinite()) throw DataError("metrics: non-finite values");
    for (Index r = 0; r < pred.rows(); ++r) {
      const auto h = static_cast<std::size_t>(r / features_);
      for (Index c = 0; c < pred.cols(); ++c) {
        const double y = static_cast<double>(target(r, c));
        const double e = static_cast<double>(pred(r, c)) - y;
        abs_[h] += std::abs(e);
        sq_[h] += e * e;
        ++count_[h];
        if (mask_zero_ && y == 0.0) {
          ++masked_;
          continue;
        }
        pct_[h] += std::abs(e / y);
        ++pct_count_[h];
      }
    }
  }

  MetricReport report() const;

 private:
  Index horizon_, features_;
  bool mask_zero_;
  std::vector<double> abs_, sq_, pct_;
  std::vector<Index> count_, pct_count_;
  Index masked_ = 0;
};

// MAE, RMSE and MAPE(%) per horizon and overall. `pred`/`target` are
// (horizon * features) x M with row h * features + d.
template <typename DP, typename DT>
MetricReport metrics(const Eigen::MatrixBase<DP>& pred, const Eigen::MatrixBase<DT>& target, Index horizon = 1,
                     Index features = 1, bool mask_zero = true) {
  MetricAccumulator acc(horizon, features, mask_zero);
  acc.add(pred, target);
  return acc.report();
}

// Mean absolute error over every element (the training objective).
template <typename DP, typename DT>
typename DP::Scalar mae_loss(const Eigen::MatrixBase<DP>& pred, const Eigen::MatrixBase<DT>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw ShapeError("mae: prediction " + shape_string(pred.rows(), pred.cols()) + " vs target " +
                     shape_string(target.rows(), target.cols()));
  if (pred.size() == 0) throw ShapeError("mae: empty input");
  if (!pred.allFinite() || !target.allFinite()) throw DataError("mae: non-finite values");
  return (pred - target).cwiseAbs().mean();
}

// Seasonal mean baseline: the prediction at time t is the mean of the
// training observations sharing t's phase within the season (default one
// week).
class HistoricalAverage {
 public:
  static constexpr double kWeekMinutes = 7.0 * 24.0 * 60.0;

  // Fits on the first `train_steps` steps of `data`.
  HistoricalAverage(const TrafficTensor& data, Index train_steps, double season_minutes = kWeekMinutes);

  // N x D prediction for one time stamp.
  MatrixXd predict(double time_minutes) const;
  // True once any prediction fell back to the overall mean.
  bool used_fallback() const { return fallback_used_; }
  bool full_coverage() const;

 private:
  Index phase_of(double time_minutes) const;

  double season_minutes_;
  int interval_minutes_;
  Index phases_;
  std::vector<MatrixXd> phase_sum_;  // per phase: N x D
  std::vector<Index> phase_count_;
  MatrixXd overall_mean_;
  mutable bool fallback_used_ = false;
};

// Convenience wrapper: one N x D prediction per query time.
std::vector<MatrixXd> historical_average(const TrafficTensor& train_series, const std::vector<double>& query_times,
                                         bool* fallback = nullptr);

// Metrics of the HA baseline on a windowed split (de-normalized).
MetricReport evaluate_historical_average(const WindowedDataset& dataset, Index train_steps, bool mask_zero = true);

}  // namespace bgcn
