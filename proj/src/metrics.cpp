#include "bgcn/metrics.hpp"

#include <cmath>

namespace bgcn {

MetricReport MetricAccumulator::report() const {
  MetricReport out;
  double abs_total = 0.0, sq_total = 0.0, pct_total = 0.0;
  Index count_total = 0, pct_total_count = 0;
  for (std::size_t h = 0; h < abs_.size(); ++h) {
    MetricValues v;
    v.count = count_[h];
    v.mape_count = pct_count_[h];
    if (v.count > 0) {
      v.mae = abs_[h] / static_cast<double>(v.count);
      v.rmse = std::sqrt(sq_[h] / static_cast<double>(v.count));
    }
    if (v.mape_count > 0) v.mape = 100.0 * pct_[h] / static_cast<double>(v.mape_count);
    out.horizons.push_back(v);
    abs_total += abs_[h];
    sq_total += sq_[h];
    pct_total += pct_[h];
    count_total += count_[h];
    pct_total_count += pct_count_[h];
  }
  out.average.count = count_total;
  out.average.mape_count = pct_total_count;
  if (count_total > 0) {
    out.average.mae = abs_total / static_cast<double>(count_total);
    out.average.rmse = std::sqrt(sq_total / static_cast<double>(count_total));
  }
  if (pct_total_count > 0) out.average.mape = 100.0 * pct_total / static_cast<double>(pct_total_count);
  out.masked = masked_;
  return out;
}

HistoricalAverage::HistoricalAverage(const TrafficTensor& data, Index train_steps, double season_minutes)
    : season_minutes_(season_minutes), interval_minutes_(data.interval_minutes) {
  data.check_shape();
  if (interval_minutes_ < 1) throw DataError("historical average: interval must be positive");
  if (train_steps < 1 || train_steps > data.num_steps()) throw UsageError("historical average: bad training span");
  phases_ = static_cast<Index>(std::llround(season_minutes_ / interval_minutes_));
  const double span = data.time_minutes[static_cast<std::size_t>(train_steps - 1)] - data.time_minutes.front() +
                      interval_minutes_;
  if (span < season_minutes_)
    throw DataError("historical average needs at least one full season of training history");
  const Index n = data.num_nodes();
  const Index dims = data.num_features();
  const MatrixXd zero = MatrixXd::Zero(n, dims);
  phase_sum_.assign(static_cast<std::size_t>(phases_), zero);
  phase_count_.assign(static_cast<std::size_t>(phases_), 0);
  overall_mean_ = zero;
  for (Index t = 0; t < train_steps; ++t) {
    const auto phase = static_cast<std::size_t>(phase_of(data.time_minutes[static_cast<std::size_t>(t)]));
    for (Index d = 0; d < dims; ++d) {
      const auto values = data.values[static_cast<std::size_t>(d)].col(t);
      phase_sum_[phase].col(d) += values;
      overall_mean_.col(d) += values;
    }
    ++phase_count_[phase];
  }
  overall_mean_ /= static_cast<double>(train_steps);
}

Index HistoricalAverage::phase_of(double time_minutes) const {
  double m = std::fmod(time_minutes, season_minutes_);
  if (m < 0) m += season_minutes_;
  return static_cast<Index>(std::floor(m / interval_minutes_ + 1e-9)) % phases_;
}

bool HistoricalAverage::full_coverage() const {
  for (Index c : phase_count_)
    if (c == 0) return false;
  return true;
}

MatrixXd HistoricalAverage::predict(double time_minutes) const {
  const auto phase = static_cast<std::size_t>(phase_of(time_minutes));
  if (phase_count_[phase] == 0) {
    fallback_used_ = true;
    return overall_mean_;
  }
  return phase_sum_[phase] / static_cast<double>(phase_count_[phase]);
}

std::vector<MatrixXd> historical_average(const TrafficTensor& train_series, const std::vector<double>& query_times,
                                         bool* fallback) {
  HistoricalAverage ha(train_series, train_series.num_steps());
  std::vector<MatrixXd> out;
  out.reserve(query_times.size());
  for (double t : query_times) out.push_back(ha.predict(t));
  if (fallback) *fallback = ha.used_fallback();
  return out;
}

MetricReport evaluate_historical_average(const WindowedDataset& dataset, Index train_steps, bool mask_zero) {
  const TrafficTensor raw = dataset.data->inverse_transform();
  HistoricalAverage ha(raw, train_steps);
  const Index dims = raw.num_features();
  MetricAccumulator acc(dataset.horizon, dims, mask_zero);
  for (Index w = 0; w < dataset.size(); ++w) {
    const auto times = dataset.target_times(w);
    MatrixXd pred(dataset.horizon * dims, raw.num_nodes());
    for (Index h = 0; h < dataset.horizon; ++h) {
      const MatrixXd p = ha.predict(times[static_cast<std::size_t>(h)]);
      for (Index d = 0; d < dims; ++d) pred.row(h * dims + d) = p.col(d).transpose();
    }
    MatrixXd target = dataset.target(w);
    for (Index r = 0; r < target.rows(); ++r)
      for (Index c = 0; c < target.cols(); ++c) target(r, c) = dataset.data->denormalize(target(r, c), r % dims);
    acc.add(pred, target);
  }
  return acc.report();
}

}  // namespace bgcn
