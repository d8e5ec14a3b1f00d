#include "bgcn/traffic_data.hpp"

#include "bgcn/text_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace bgcn {

double distance_bandwidth(const DistanceMap& distances) {
  std::vector<double> finite;
  for (const auto& [edge, d] : distances) {
    if (edge.first == edge.second || !std::isfinite(d)) continue;
    if (d < 0.0)
      throw DataError("negative distance for pair (" + std::to_string(edge.first) + "," +
                      std::to_string(edge.second) + ")");
    finite.push_back(d);
  }
  if (finite.empty()) throw DataError("no finite off-diagonal distance to derive xi from");
  double mean = 0.0;
  for (double d : finite) mean += d;
  mean /= static_cast<double>(finite.size());
  double var = 0.0;
  for (double d : finite) var += (d - mean) * (d - mean);
  var /= static_cast<double>(finite.size());
  const double xi = std::sqrt(var);
  if (!(xi > 0.0))
    throw DegenerateInputError("kernel bandwidth xi is 0: all distances are identical");
  return xi;
}

void TrafficTensor::check_shape() const {
  if (values.empty()) throw ShapeError("traffic tensor has no features");
  for (std::size_t d = 1; d < values.size(); ++d) {
    if (values[d].rows() != values[0].rows() || values[d].cols() != values[0].cols())
      throw ShapeError("feature " + std::to_string(d) + " has shape " +
                       shape_string(values[d].rows(), values[d].cols()) + ", expected " +
                       shape_string(values[0].rows(), values[0].cols()));
  }
  if (static_cast<Index>(time_minutes.size()) != num_steps())
    throw ShapeError("time axis has " + std::to_string(time_minutes.size()) + " stamps for " +
                     std::to_string(num_steps()) + " steps");
  if (!node_ids.empty() && static_cast<Index>(node_ids.size()) != num_nodes())
    throw ShapeError("node id list has " + std::to_string(node_ids.size()) + " entries for " +
                     std::to_string(num_nodes()) + " nodes");
}

TrafficTensor TrafficTensor::inverse_transform() const {
  TrafficTensor out = *this;
  if (!normalized) return out;
  for (Index d = 0; d < num_features(); ++d)
    out.values[d] = (values[d].array() * std(d) + mean(d)).matrix();
  out.normalized = false;
  return out;
}

std::vector<double> drop_missing_steps(TrafficTensor& data) {
  data.check_shape();
  const Index steps = data.num_steps();
  std::vector<Index> keep;
  std::vector<double> dropped;
  for (Index t = 0; t < steps; ++t) {
    bool ok = true;
    for (const auto& v : data.values) ok = ok && v.col(t).allFinite();
    if (ok)
      keep.push_back(t);
    else
      dropped.push_back(data.time_minutes[t]);
  }
  if (dropped.empty()) return dropped;
  for (auto& v : data.values) {
    MatrixXd kept(v.rows(), static_cast<Index>(keep.size()));
    for (Index k = 0; k < kept.cols(); ++k) kept.col(k) = v.col(keep[k]);
    v = std::move(kept);
  }
  std::vector<double> times;
  times.reserve(keep.size());
  for (Index t : keep) times.push_back(data.time_minutes[t]);
  data.time_minutes = std::move(times);
  return dropped;
}

TrafficTensor zscore_fit_transform(const TrafficTensor& raw, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0))
    throw UsageError("train_fraction must lie in (0, 1]");
  raw.check_shape();
  const Index train_steps =
      std::max<Index>(1, static_cast<Index>(std::floor(train_fraction * raw.num_steps())));
  TrafficTensor out = raw;
  out.mean.resize(raw.num_features());
  out.std.resize(raw.num_features());
  for (Index d = 0; d < raw.num_features(); ++d) {
    const auto block = raw.values[d].leftCols(train_steps).array();
    const double mean = block.mean();
    const double var = (block - mean).square().mean();
    const double sd = std::sqrt(var);
    if (!(sd > 0.0) || !std::isfinite(sd)) {
      const std::string name =
          d < static_cast<Index>(raw.feature_names.size()) ? raw.feature_names[d] : std::to_string(d);
      throw DegenerateInputError("feature '" + name + "' has zero variance on the training split");
    }
    out.mean(d) = mean;
    out.std(d) = sd;
    out.values[d] = ((raw.values[d].array() - mean) / sd).matrix();
  }
  out.normalized = true;
  return out;
}

const char* split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

MatrixXd WindowedDataset::input(Index window) const {
  const Index start = starts.at(static_cast<std::size_t>(window));
  const Index n = data->num_nodes();
  MatrixXd x(data->num_features(), t_in * n);
  for (Index d = 0; d < data->num_features(); ++d)
    for (Index t = 0; t < t_in; ++t) x.row(d).segment(t * n, n) = data->values[d].col(start + t).transpose();
  return x;
}

MatrixXd WindowedDataset::target(Index window) const {
  const Index start = starts.at(static_cast<std::size_t>(window)) + t_in;
  const Index dims = data->num_features();
  MatrixXd y(horizon * dims, data->num_nodes());
  for (Index h = 0; h < horizon; ++h)
    for (Index d = 0; d < dims; ++d) y.row(h * dims + d) = data->values[d].col(start + h).transpose();
  return y;
}

std::vector<double> WindowedDataset::target_times(Index window) const {
  const Index start = starts.at(static_cast<std::size_t>(window)) + t_in;
  std::vector<double> times;
  for (Index h = 0; h < horizon; ++h) times.push_back(data->time_minutes[start + h]);
  return times;
}

WindowSplits make_windows(std::shared_ptr<const TrafficTensor> data, Index t_in, Index horizon,
                          SplitRatio ratio) {
  if (t_in < 1 || horizon < 1) throw UsageError("t_in and horizon must be positive");
  if (ratio.train < 0 || ratio.val < 0 || ratio.test < 0 || ratio.train + ratio.val + ratio.test <= 0)
    throw UsageError("split ratio must be nonnegative with a positive sum");
  data->check_shape();
  const Index steps = data->num_steps();
  if (steps < t_in + horizon)
    throw DataError("series of " + std::to_string(steps) + " steps is shorter than one window (" +
                    std::to_string(t_in + horizon) + ")");
  const double total = ratio.train + ratio.val + ratio.test;
  WindowSplits out;
  out.boundary_train_val = static_cast<Index>(std::floor(steps * ratio.train / total));
  out.boundary_val_test = static_cast<Index>(std::floor(steps * (ratio.train + ratio.val) / total));
  if (ratio.val == 0 && ratio.test == 0) out.boundary_train_val = out.boundary_val_test = steps;

  auto fill = [&](WindowedDataset& ds, Split split, Index lo, Index hi) {
    ds.data = data;
    ds.t_in = t_in;
    ds.horizon = horizon;
    ds.split = split;
    const Index count = window_count(hi - lo, t_in, horizon);
    for (Index s = 0; s < count; ++s) ds.starts.push_back(lo + s);
  };
  fill(out.train, Split::train, 0, out.boundary_train_val);
  fill(out.val, Split::val, out.boundary_train_val, out.boundary_val_test);
  fill(out.test, Split::test, out.boundary_val_test, steps);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

}  // namespace

TrafficTensor load_traffic_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw DataError(path.string() + ": empty file");
  const auto header = split_csv(lines[0]);
  if (header.size() < 2 || trim(header[0]) != "time")
    throw DataError(where(path, 1) + ": header must be 'time,<node_id>,...'");
  TrafficTensor out;
  for (std::size_t c = 1; c < header.size(); ++c) out.node_ids.push_back(trim(header[c]));
  out.feature_names.push_back(path.stem().string());
  const Index n = static_cast<Index>(out.node_ids.size());

  std::vector<std::vector<double>> columns;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    if (trim(lines[l]).empty()) continue;
    const auto cells = split_csv(lines[l]);
    if (static_cast<Index>(cells.size()) != n + 1)
      throw ShapeError(where(path, l + 1) + ": expected " + std::to_string(n + 1) + " cells, found " +
                       std::to_string(cells.size()));
    const auto t = parse_double(cells[0]);
    if (!t || !std::isfinite(*t)) throw DataError(where(path, l + 1) + ": non-numeric time '" + cells[0] + "'");
    out.time_minutes.push_back(*t);
    std::vector<double> row(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      const std::string cell = trim(cells[static_cast<std::size_t>(i + 1)]);
      if (cell.empty() || cell == "nan" || cell == "NaN" || cell == "NA") {
        row[static_cast<std::size_t>(i)] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      const auto v = parse_double(cell);
      if (!v)
        throw DataError(where(path, l + 1) + ": non-numeric cell '" + cell + "' in column " +
                        std::to_string(i + 2));
      row[static_cast<std::size_t>(i)] = *v;
    }
    columns.push_back(std::move(row));
  }
  MatrixXd values(n, static_cast<Index>(columns.size()));
  for (Index t = 0; t < values.cols(); ++t)
    for (Index i = 0; i < n; ++i) values(i, t) = columns[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
  out.values.push_back(std::move(values));
  for (std::size_t t = 1; t < out.time_minutes.size(); ++t)
    if (!(out.time_minutes[t] > out.time_minutes[t - 1]))
      throw DataError(where(path, t + 2) + ": time stamps must be strictly increasing");
  if (out.time_minutes.size() >= 2) out.interval_minutes = static_cast<int>(out.time_minutes[1] - out.time_minutes[0]);
  return out;
}

TrafficTensor load_traffic_csvs(const std::vector<std::filesystem::path>& paths) {
  if (paths.empty()) throw UsageError("no traffic files given");
  TrafficTensor out = load_traffic_csv(paths.front());
  for (std::size_t k = 1; k < paths.size(); ++k) {
    TrafficTensor next = load_traffic_csv(paths[k]);
    if (next.node_ids != out.node_ids)
      throw ShapeError(paths[k].string() + ": node columns differ from " + paths.front().string());
    if (next.time_minutes != out.time_minutes)
      throw ShapeError(paths[k].string() + ": time column differs from " + paths.front().string());
    out.values.push_back(std::move(next.values.front()));
    out.feature_names.push_back(next.feature_names.front());
  }
  return out;
}

void save_traffic_csv(const std::filesystem::path& path, const TrafficTensor& data, Index feature) {
  data.check_shape();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "time";
  for (Index i = 0; i < data.num_nodes(); ++i)
    out << ',' << (data.node_ids.empty() ? std::to_string(i) : data.node_ids[static_cast<std::size_t>(i)]);
  out << '\n';
  const MatrixXd& v = data.values.at(static_cast<std::size_t>(feature));
  for (Index t = 0; t < data.num_steps(); ++t) {
    out << format_double(data.time_minutes[static_cast<std::size_t>(t)]);
    for (Index i = 0; i < data.num_nodes(); ++i) out << ',' << format_double(v(i, t));
    out << '\n';
  }
}

namespace {

constexpr char kTensorMagic[4] = {'B', 'G', 'T', 'T'};
constexpr std::uint32_t kTensorVersion = 1;

}  // namespace

void save_traffic_binary(const std::filesystem::path& path, const TrafficTensor& data) {
  data.check_shape();
  BinaryWriter w(path);
  w.bytes(kTensorMagic, 4);
  w.u32(kTensorVersion);
  w.u64(static_cast<std::uint64_t>(data.num_nodes()));
  w.u64(static_cast<std::uint64_t>(data.num_steps()));
  w.u64(static_cast<std::uint64_t>(data.num_features()));
  w.u32(static_cast<std::uint32_t>(data.interval_minutes));
  for (double t : data.time_minutes) w.f64(t);
  for (const auto& v : data.values)
    for (Index t = 0; t < v.cols(); ++t)
      for (Index i = 0; i < v.rows(); ++i) w.f64(v(i, t));
  for (Index i = 0; i < data.num_nodes(); ++i)
    w.str(data.node_ids.empty() ? std::to_string(i) : data.node_ids[static_cast<std::size_t>(i)]);
  for (Index d = 0; d < data.num_features(); ++d)
    w.str(d < static_cast<Index>(data.feature_names.size()) ? data.feature_names[static_cast<std::size_t>(d)]
                                                            : "feature" + std::to_string(d));
}

TrafficTensor load_traffic_binary(const std::filesystem::path& path) {
  BinaryReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kTensorMagic, 4) != 0) throw DataError(path.string() + ": not a traffic tensor file");
  const auto version = r.u32();
  if (version != kTensorVersion)
    throw DataError(path.string() + ": unsupported tensor version " + std::to_string(version));
  const auto n = static_cast<Index>(r.u64());
  const auto steps = static_cast<Index>(r.u64());
  const auto dims = static_cast<Index>(r.u64());
  TrafficTensor out;
  out.interval_minutes = static_cast<int>(r.u32());
  out.time_minutes.resize(static_cast<std::size_t>(steps));
  for (auto& t : out.time_minutes) t = r.f64();
  out.values.assign(static_cast<std::size_t>(dims), MatrixXd(n, steps));
  for (auto& v : out.values)
    for (Index t = 0; t < steps; ++t)
      for (Index i = 0; i < n; ++i) v(i, t) = r.f64();
  for (Index i = 0; i < n; ++i) out.node_ids.push_back(r.str());
  for (Index d = 0; d < dims; ++d) out.feature_names.push_back(r.str());
  return out;
}

DistanceMap load_distance_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw DataError(path.string() + ": empty file");
  const auto header = split_csv(lines[0]);
  if (header.size() != 3 || trim(header[0]) != "from" || trim(header[1]) != "to" || trim(header[2]) != "cost")
    throw DataError(where(path, 1) + ": header must be 'from,to,cost'");
  DistanceMap out;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    if (trim(lines[l]).empty()) continue;
    const auto cells = split_csv(lines[l]);
    if (cells.size() != 3)
      throw ShapeError(where(path, l + 1) + ": expected 3 cells, found " + std::to_string(cells.size()));
    const auto from = parse_index(cells[0]);
    const auto to = parse_index(cells[1]);
    const auto cost = parse_double(cells[2]);
    if (!from || !to) throw DataError(where(path, l + 1) + ": node indices must be nonnegative integers");
    if (!cost) throw DataError(where(path, l + 1) + ": non-numeric cost '" + cells[2] + "'");
    if (*cost < 0) throw DataError(where(path, l + 1) + ": negative cost");
    const auto key = std::make_pair(*from, *to);
    if (!out.emplace(key, *cost).second)
      throw DataError(where(path, l + 1) + ": duplicate pair (" + std::to_string(*from) + "," +
                      std::to_string(*to) + ")");
  }
  return out;
}

void save_distance_csv(const std::filesystem::path& path, const DistanceMap& distances) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "from,to,cost\n";
  for (const auto& [edge, d] : distances) out << edge.first << ',' << edge.second << ',' << format_double(d) << '\n';
}

std::vector<std::string> load_node_ids(const std::filesystem::path& path) {
  std::vector<std::string> ids;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    const std::string id = trim(line);
    if (id.empty()) continue;
    if (!seen.insert(id).second) throw DataError(where(path, line_no) + ": duplicate node id '" + id + "'");
    ids.push_back(id);
  }
  if (ids.empty()) throw DataError(path.string() + ": no node ids");
  return ids;
}

void save_node_ids(const std::filesystem::path& path, const std::vector<std::string>& ids) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& id : ids) out << id << '\n';
}

MatrixXd load_matrix_csv(const std::filesystem::path& path) {
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    for (const auto& cell : split_csv(line)) {
      const auto v = parse_double(cell);
      if (!v) throw DataError(where(path, line_no) + ": non-numeric cell '" + cell + "'");
      row.push_back(*v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ShapeError(where(path, line_no) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return MatrixXd();
  MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

void save_matrix_csv(const std::filesystem::path& path, const MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

}  // namespace bgcn
