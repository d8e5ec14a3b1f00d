#include "bgcn/pipeline.hpp"

#include "bgcn/graph_ops.hpp"
#include "bgcn/text_io.hpp"

#include <iomanip>
#include <sstream>

namespace bgcn {

PreparedData prepare_tensor(TrafficTensor raw, const DistanceMap& distances, const ExperimentConfig& config) {
  config.validate();
  raw.check_shape();
  PreparedData out;
  out.dropped_times = drop_missing_steps(raw);
  const SplitRatio& ratio = config.data.split;
  const double fraction = ratio.train / (ratio.train + ratio.val + ratio.test);
  out.data = std::make_shared<const TrafficTensor>(zscore_fit_transform(raw, fraction));
  out.raw = std::move(raw);
  out.train_steps = std::max<Index>(1, static_cast<Index>(std::floor(fraction * out.raw.num_steps())));

  out.road.node_ids = out.raw.node_ids;
  out.road.distances = distances;
  out.road.epsilon = config.data.epsilon;
  out.road.observed_adjacency =
      construct_observed_adjacency(distances, out.road.num_nodes(), config.data.epsilon, &out.road.xi);
  out.splits = make_windows(out.data, config.model.t_in, config.model.horizon, ratio);
  return out;
}

PreparedData prepare_data(const std::filesystem::path& dir, const ExperimentConfig& config) {
  if (!std::filesystem::is_directory(dir)) throw DataError("data directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& name : config.data.features) {
    const auto path = dir / (name + ".csv");
    if (!std::filesystem::exists(path)) throw DataError("missing feature file " + path.string());
    files.push_back(path);
  }
  TrafficTensor raw = load_traffic_csvs(files);
  const auto distance_path = dir / "distances.csv";
  if (!std::filesystem::exists(distance_path)) throw DataError("missing distance file " + distance_path.string());
  const DistanceMap distances = load_distance_csv(distance_path);
  const auto ids_path = dir / "node_ids.txt";
  if (std::filesystem::exists(ids_path)) {
    const auto ids = load_node_ids(ids_path);
    if (ids != raw.node_ids)
      throw DataError(ids_path.string() + ": node ids do not match the column header of " + files.front().string());
  }
  return prepare_tensor(std::move(raw), distances, config);
}

ConstantGraph infer_constant_graph(const RoadGraph& road, const ExperimentConfig& config) {
  ConstantGraph out;
  GvaeConfig gvae = config.gvae;
  gvae.seed = config.gvae_seed();
  out.embeddings = gvae_train(road.observed_adjacency, gvae);
  out.distances = pairwise_sq_distances(out.embeddings.vectors);
  out.map = solve_map_graph(out.distances, config.map);
  out.adjacency = out.map.normalized;
  return out;
}

BackboneConfig model_config_for(const PreparedData& prepared, const ExperimentConfig& config) {
  BackboneConfig m = config.model;
  m.num_nodes = prepared.data->num_nodes();
  m.features_in = m.features_out = static_cast<int>(prepared.data->num_features());
  m.validate();
  return m;
}

const char* to_string(Ablation ablation) {
  switch (ablation) {
    case Ablation::full: return "full";
    case Ablation::no_uncertainty: return "no-uncertainty";
    case Ablation::no_phi: return "no-phi";
    case Ablation::no_constant: return "no-constant";
  }
  return "?";
}

Ablation parse_ablation(const std::string& text) {
  for (Ablation a : all_ablations())
    if (text == to_string(a)) return a;
  throw UsageError("unknown ablation '" + text + "' (full|no-uncertainty|no-phi|no-constant)");
}

ExperimentConfig ablation_config(const ExperimentConfig& config, Ablation ablation) {
  ExperimentConfig out = config;
  if (ablation == Ablation::no_uncertainty) out.model.dropout_rate = 0.0;
  if (ablation == Ablation::no_phi) out.model.learn_phi = false;
  return out;
}

MatrixXd ablation_constant(const MatrixXd& constant, Ablation ablation) {
  if (ablation == Ablation::no_constant) return MatrixXd::Identity(constant.rows(), constant.cols());
  return constant;
}

RunResult run_training(const PreparedData& prepared, const MatrixXd& constant, const ExperimentConfig& config,
                       const std::string& name, const EpochCallback& on_epoch) {
  RunResult out;
  out.name = name;
  const BackboneConfig mc = model_config_for(prepared, config);
  if (constant.rows() != mc.num_nodes || constant.cols() != mc.num_nodes)
    throw ShapeError("constant graph is " + shape_string(constant.rows(), constant.cols()) + " for " +
                     std::to_string(mc.num_nodes) + " nodes");
  out.model = std::make_shared<ForecastModel>(mc, constant, config.model_seed());
  TrainConfig tc = config.train;
  tc.seed = config.train_seed();
  out.report = train(*out.model, prepared.splits, tc, on_epoch);
  out.final_parameters = snapshot_parameters(*out.model);
  const std::uint64_t eval_seed = tc.seed ^ 0xe7a1u;
  if (prepared.splits.test.size() > 0)
    out.test_final = evaluate_model(*out.model, prepared.splits.test, tc.eval_mc_samples, eval_seed, tc.mask_zero);
  load_parameters(*out.model, out.report.best_parameters);
  out.val_best = evaluate_model(*out.model, prepared.splits.val, tc.eval_mc_samples, eval_seed, tc.mask_zero);
  if (prepared.splits.test.size() > 0)
    out.test_best = evaluate_model(*out.model, prepared.splits.test, tc.eval_mc_samples, eval_seed, tc.mask_zero);
  return out;
}

std::vector<RunResult> run_ablation(const PreparedData& prepared, const MatrixXd& constant,
                                    const ExperimentConfig& config, const std::vector<Ablation>& rows,
                                    const EpochCallback& on_epoch) {
  std::vector<RunResult> out;
  for (Ablation a : rows) {
    try {
      // The identity row is sized by the data, so it runs even if `constant` is unusable.
      const MatrixXd row_constant = a == Ablation::no_constant
                                        ? MatrixXd::Identity(prepared.data->num_nodes(), prepared.data->num_nodes())
                                        : constant;
      out.push_back(run_training(prepared, row_constant, ablation_config(config, a), to_string(a), on_epoch));
    } catch (const Error& e) {
      RunResult failed;
      failed.name = to_string(a);
      failed.error = e.what();
      out.push_back(std::move(failed));
    }
  }
  return out;
}

std::vector<RunResult> sweep_dropout(const PreparedData& prepared, const MatrixXd& constant,
                                     const ExperimentConfig& config, const std::vector<double>& rates,
                                     const EpochCallback& on_epoch) {
  for (double r : rates)
    if (!(r >= 0 && r < 1)) throw UsageError("dropout rates must lie in [0, 1), got " + format_double(r));
  std::vector<RunResult> out;
  for (double r : rates) {
    ExperimentConfig c = config;
    c.model.dropout_rate = r;
    try {
      out.push_back(run_training(prepared, constant, c, format_double(r), on_epoch));
    } catch (const Error& e) {
      RunResult failed;
      failed.name = format_double(r);
      failed.error = e.what();
      out.push_back(std::move(failed));
    }
  }
  return out;
}

namespace {

std::string mape_cell(const MetricValues& v) { return v.mape ? format_double(*v.mape) : "nan"; }

}  // namespace

std::string results_csv(const std::vector<RunResult>& results, const std::string& label) {
  std::ostringstream s;
  s << label
    << ",best_epoch,val_mae,val_rmse,val_mape,test_mae,test_rmse,test_mape,final_test_mae,final_test_rmse,"
       "final_test_mape,error\n";
  for (const auto& r : results) {
    s << r.name << ',';
    if (r.error) {
      s << ",,,,,,,,,," << '"' << *r.error << '"' << '\n';
      continue;
    }
    const auto& v = r.val_best.average;
    const auto& t = r.test_best.average;
    const auto& f = r.test_final.average;
    s << r.report.best_epoch << ',' << format_double(v.mae) << ',' << format_double(v.rmse) << ',' << mape_cell(v)
      << ',' << format_double(t.mae) << ',' << format_double(t.rmse) << ',' << mape_cell(t) << ','
      << format_double(f.mae) << ',' << format_double(f.rmse) << ',' << mape_cell(f) << ",\n";
  }
  return s.str();
}

std::string metric_table(const MetricReport& report) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4);
  s << "horizon      MAE       RMSE      MAPE(%)\n";
  auto row = [&](const std::string& label, const MetricValues& v) {
    s << std::left << std::setw(9) << label << std::right << std::setw(10) << v.mae << std::setw(10) << v.rmse;
    if (v.mape) s << std::setw(12) << *v.mape;
    else s << std::setw(12) << "undefined";
    s << "\n";
  };
  for (std::size_t h = 0; h < report.horizons.size(); ++h) row(std::to_string(h + 1), report.horizons[h]);
  row("average", report.average);
  s << "zero targets excluded from MAPE: " << report.masked << "\n";
  return s.str();
}

namespace {

constexpr char kCheckpointMagic[8] = {'B', 'G', 'C', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ForecastModel& model, const ExperimentConfig& config) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  BinaryWriter w(path);
  w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u32(kCheckpointVersion);
  ExperimentConfig stored = config;
  stored.model = model.config();
  w.str(dump_config(stored));
  w.u64(static_cast<std::uint64_t>(model.config().num_nodes));
  w.u32(static_cast<std::uint32_t>(model.config().features_in));
  w.u32(static_cast<std::uint32_t>(model.config().features_out));
  w.u64(model.seed());
  w.matrix(model.constant_adjacency());
  w.u64(model.parameters().size());
  for (const auto& p : model.parameters()) {
    w.str(p.name);
    w.u32(p.trainable ? 1 : 0);
    w.matrix(p.value);
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  BinaryReader r(path);
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (!std::equal(magic, magic + 8, kCheckpointMagic)) throw DataError(path.string() + ": not a checkpoint file");
  const auto version = r.u32();
  if (version != kCheckpointVersion)
    throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint out;
  apply_config_text(out.config, r.str(), path.string());
  BackboneConfig mc = out.config.model;
  mc.num_nodes = static_cast<Index>(r.u64());
  mc.features_in = static_cast<int>(r.u32());
  mc.features_out = static_cast<int>(r.u32());
  const std::uint64_t seed = r.u64();
  const MatrixXd constant = r.matrix();
  out.config.model = mc;
  out.model = std::make_shared<ForecastModel>(mc, constant, seed);
  const auto count = r.u64();
  auto& params = out.model->parameters();
  if (count != params.size()) throw DataError(path.string() + ": parameter count does not match its config");
  for (auto& p : params) {
    const std::string name = r.str();
    if (name != p.name) throw DataError(path.string() + ": expected parameter '" + p.name + "', found '" + name + "'");
    p.trainable = r.u32() != 0;
    MatrixXd value = r.matrix();
    if (value.rows() != p.value.rows() || value.cols() != p.value.cols())
      throw DataError(path.string() + ": parameter '" + name + "' has shape " + shape_string(value.rows(), value.cols()));
    p.value = std::move(value);
  }
  return out;
}

}  // namespace bgcn
