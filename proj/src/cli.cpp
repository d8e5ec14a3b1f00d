#include "bgcn/cli.hpp"

#include "bgcn/synth.hpp"
#include "bgcn/text_io.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <optional>
#include <ostream>

namespace bgcn {

namespace fs = std::filesystem;

nlohmann::json manifest_json(const PreparedData& p, const ExperimentConfig& config) {
  const auto& s = p.splits;
  nlohmann::json j;
  j["xi"] = p.road.xi;
  j["epsilon"] = p.road.epsilon;
  j["seed"] = config.seed;
  j["node_ids"] = p.road.node_ids;
  j["features"] = p.data->feature_names;
  j["num_steps"] = p.data->num_steps();
  j["interval_minutes"] = p.data->interval_minutes;
  j["dropped_times"] = p.dropped_times;
  j["normalization"] = {{"train_steps", p.train_steps},
                        {"mean", std::vector<double>(p.data->mean.begin(), p.data->mean.end())},
                        {"std", std::vector<double>(p.data->std.begin(), p.data->std.end())}};
  j["windows"] = {{"t_in", s.train.t_in}, {"horizon", s.train.horizon}};
  j["splits"] = {{"boundary_train_val", s.boundary_train_val},
                 {"boundary_val_test", s.boundary_val_test},
                 {"train", s.train.size()},
                 {"val", s.val.size()},
                 {"test", s.test.size()}};
  return j;
}

nlohmann::json map_graph_json(const MapGraph& map, const MapGraphConfig& config) {
  return {{"alpha", config.alpha},
          {"beta", config.beta},
          {"iterations", map.iterations},
          {"final_objective", map.final_objective},
          {"converged", map.converged},
          {"distance_scale", map.distance_scale}};
}

PlotInputs collect_plot_inputs(const ForecastModel& model, const PreparedData& prepared,
                               const ExperimentConfig& config, Index trace_nodes, Index trace_steps) {
  PlotInputs in;
  in.observed = prepared.road.observed_adjacency;
  in.constant = model.constant_adjacency();
  in.constant_phi = model.expected_graph();
  const std::uint64_t eval_seed = config.train_seed() ^ 0xe7a1;
  const WindowedDataset& test = prepared.splits.test;
  in.test = evaluate_model(model, test, config.train.eval_mc_samples, eval_seed, config.train.mask_zero);
  const Index nodes = std::min(trace_nodes, prepared.data->num_nodes());
  const Index steps = std::min(trace_steps, test.size());
  for (Index n = 0; n < nodes; ++n) in.trace_nodes.push_back(prepared.data->node_ids[static_cast<std::size_t>(n)]);
  in.trace_prediction.resize(nodes, steps);
  in.trace_truth.resize(nodes, steps);
  Rng rng(eval_seed);
  for (Index w = 0; w < steps; ++w) {
    const MatrixXd pred = predict_window(model, test, w, config.train.eval_mc_samples, rng);
    const MatrixXd target = test.target(w);
    for (Index n = 0; n < nodes; ++n) {
      in.trace_prediction(n, w) = pred(0, n);
      in.trace_truth(n, w) = prepared.data->denormalize(target(0, n), 0);
    }
  }
  return in;
}

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_file(path, j.dump(2) + "\n"); }

fs::path require(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("missing artifact " + path.string());
  return path;
}

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string data;
  std::vector<std::string> sets;
  bool quiet = false;

  // subcommand specific
  SyntheticSpec synth;
  std::string model_dir;
  std::string checkpoint = "best";
  std::string split = "test";
  Index window = 0;
  std::vector<std::string> rows;
  std::vector<double> rates;
};

struct Context {
  Options& opt;
  ExperimentConfig config;
  std::ostream& out;
  std::ostream& err;

  fs::path out_dir() const {
    fs::create_directories(opt.out);
    return opt.out;
  }
  fs::path data_dir() const {
    if (opt.data.empty()) throw UsageError("--data is required for this command");
    return opt.data;
  }
  EpochCallback progress() const {
    if (opt.quiet) return {};
    return [this](const EpochRecord& e) {
      err << "epoch " << e.epoch << " train_loss " << e.train_loss << " val_mae " << e.val.mae << std::endl;
    };
  }
};

ExperimentConfig resolve_config(const Options& opt) {
  ExperimentConfig c = opt.config_path.empty() ? ExperimentConfig{} : load_config(opt.config_path);
  for (std::size_t i = 0; i < opt.sets.size(); ++i) apply_config_text(c, opt.sets[i], "--set #" + std::to_string(i + 1));
  apply_env_overrides(c);
  if (opt.seed) c.seed = *opt.seed;
  c.validate();
  return c;
}

const WindowedDataset& split_of(const PreparedData& p, const std::string& name) {
  if (name == "train") return p.splits.train;
  if (name == "val") return p.splits.val;
  if (name == "test") return p.splits.test;
  throw UsageError("unknown split '" + name + "' (train, val, test)");
}

Checkpoint load_model_dir(const Options& opt) {
  if (opt.model_dir.empty()) throw UsageError("--model is required for this command");
  return load_checkpoint(require(fs::path(opt.model_dir) / (opt.checkpoint + ".ckpt")));
}

void save_graph(const fs::path& dir, const ConstantGraph& g, const ExperimentConfig& c) {
  save_matrix_csv(dir / "map_graph.csv", g.map.adjacency);
  save_matrix_csv(dir / "map_graph_normalized.csv", g.adjacency);
  write_json(dir / "map_graph.json", map_graph_json(g.map, c.map));
}

void cmd_synth(Context& ctx) {
  SyntheticSpec spec = ctx.opt.synth;
  spec.seed = ctx.config.seed;
  const SyntheticData d = generate_synthetic(spec);
  write_synthetic(ctx.out_dir(), spec, d);
  ctx.out << "wrote " << spec.n_nodes << " nodes x " << d.flow.num_steps() << " steps to " << ctx.opt.out << "\n";
}

void cmd_prepare(Context& ctx) {
  const PreparedData p = prepare_data(ctx.data_dir(), ctx.config);
  const fs::path dir = ctx.out_dir();
  write_json(dir / "manifest.json", manifest_json(p, ctx.config));
  save_traffic_binary(dir / "normalized.bin", *p.data);
  save_matrix_csv(dir / "observed_adjacency.csv", p.road.observed_adjacency);
  save_node_ids(dir / "node_ids.txt", p.road.node_ids);
  ctx.out << "nodes " << p.data->num_nodes() << " xi " << format_double(p.road.xi) << " epsilon "
          << format_double(p.road.epsilon) << " windows " << p.splits.train.size() << "/" << p.splits.val.size()
          << "/" << p.splits.test.size() << " dropped " << p.dropped_times.size() << "\n";
}

void cmd_embed(Context& ctx) {
  const PreparedData p = prepare_data(ctx.data_dir(), ctx.config);
  GvaeConfig g = ctx.config.gvae;
  g.seed = ctx.config.gvae_seed();
  const NodeEmbeddings e = gvae_train(p.road.observed_adjacency, g);
  const fs::path dir = ctx.out_dir();
  save_matrix_csv(dir / "embeddings.csv", e.vectors);
  save_node_ids(dir / "node_ids.txt", p.road.node_ids);
  ctx.out << "embeddings " << e.vectors.rows() << "x" << e.vectors.cols() << " final loss "
          << format_double(e.loss_trace.empty() ? 0.0 : e.loss_trace.back()) << "\n";
}

void cmd_infer_graph(Context& ctx) {
  const PreparedData p = prepare_data(ctx.data_dir(), ctx.config);
  const ConstantGraph g = infer_constant_graph(p.road, ctx.config);
  save_graph(ctx.out_dir(), g, ctx.config);
  ctx.out << "map graph: " << g.map.iterations << " iterations, objective " << format_double(g.map.final_objective)
          << (g.map.converged ? ", converged" : ", not converged") << "\n";
}

void cmd_train(Context& ctx) {
  const PreparedData p = prepare_data(ctx.data_dir(), ctx.config);
  const ConstantGraph g = infer_constant_graph(p.road, ctx.config);
  const fs::path dir = ctx.out_dir();
  write_json(dir / "manifest.json", manifest_json(p, ctx.config));
  save_matrix_csv(dir / "observed_adjacency.csv", p.road.observed_adjacency);
  save_graph(dir, g, ctx.config);
  const RunResult r = run_training(p, g.adjacency, ctx.config, "train", ctx.progress());
  write_file(dir / "report.jsonl", r.report.to_jsonl());
  save_checkpoint(dir / "best.ckpt", *r.model, ctx.config);
  ForecastModel final_model = *r.model;
  load_parameters(final_model, r.final_parameters);
  save_checkpoint(dir / "final.ckpt", final_model, ctx.config);
  const std::string summary = "best epoch " + std::to_string(r.report.best_epoch) + "\n\nvalidation (best)\n" +
                              metric_table(r.val_best) + "\ntest (best)\n" + metric_table(r.test_best) +
                              "\ntest (final)\n" + metric_table(r.test_final);
  write_file(dir / "metrics.txt", summary);
  ctx.out << summary;
}

void cmd_eval(Context& ctx) {
  const Checkpoint ck = load_model_dir(ctx.opt);
  const PreparedData p = prepare_data(ctx.data_dir(), ck.config);
  const MetricReport r = evaluate_model(*ck.model, split_of(p, ctx.opt.split), ck.config.train.eval_mc_samples,
                                        ck.config.train_seed() ^ 0xe7a1, ck.config.train.mask_zero);
  const std::string table = metric_table(r);
  write_file(ctx.out_dir() / ("eval_" + ctx.opt.split + ".txt"), table);
  ctx.out << table;
}

void cmd_predict(Context& ctx) {
  const Checkpoint ck = load_model_dir(ctx.opt);
  const PreparedData p = prepare_data(ctx.data_dir(), ck.config);
  const WindowedDataset& ds = split_of(p, ctx.opt.split);
  if (ctx.opt.window < 0 || ctx.opt.window >= ds.size())
    throw UsageError("window " + std::to_string(ctx.opt.window) + " outside [0, " + std::to_string(ds.size()) + ")");
  Rng rng(ck.config.train_seed() ^ 0xe7a1);
  const MatrixXd pred = predict_window(*ck.model, ds, ctx.opt.window, ck.config.train.eval_mc_samples, rng);
  const auto times = ds.target_times(ctx.opt.window);
  const Index dims = p.data->num_features();
  std::string text = "time_minutes,feature";
  for (const auto& id : p.data->node_ids) text += "," + id;
  text += "\n";
  for (Index r = 0; r < pred.rows(); ++r) {
    text += format_double(times[static_cast<std::size_t>(r / dims)]) + "," +
            p.data->feature_names[static_cast<std::size_t>(r % dims)];
    for (Index n = 0; n < pred.cols(); ++n) text += "," + format_double(pred(r, n));
    text += "\n";
  }
  write_file(ctx.out_dir() / "prediction.csv", text);
  ctx.out << text;
}

void cmd_ablate(Context& ctx) {
  const PreparedData p = prepare_data(ctx.data_dir(), ctx.config);
  const ConstantGraph g = infer_constant_graph(p.road, ctx.config);
  std::vector<Ablation> rows;
  for (const auto& r : ctx.opt.rows) rows.push_back(parse_ablation(r));
  if (rows.empty()) rows = all_ablations();
  const auto results = run_ablation(p, g.adjacency, ctx.config, rows, ctx.progress());
  const std::string table = results_csv(results);
  write_file(ctx.out_dir() / "ablation.csv", table);
  ctx.out << table;
}

void cmd_sweep(Context& ctx) {
  const PreparedData p = prepare_data(ctx.data_dir(), ctx.config);
  const ConstantGraph g = infer_constant_graph(p.road, ctx.config);
  const std::vector<double> rates = ctx.opt.rates.empty() ? default_dropout_grid() : ctx.opt.rates;
  const auto results = sweep_dropout(p, g.adjacency, ctx.config, rates, ctx.progress());
  const std::string table = results_csv(results, "dropout_rate");
  const fs::path dir = ctx.out_dir();
  write_file(dir / "dropout_sweep.csv", table);
  std::vector<double> val;
  for (const auto& r : results) val.push_back(r.error ? NAN : r.val_best.average.mae);
  render_curves({val}).save_ppm(dir / "dropout_sweep.ppm");
  ctx.out << table;
}

void cmd_plot(Context& ctx) {
  if (ctx.opt.model_dir.empty()) throw UsageError("--model is required for this command");
  const Checkpoint ck = load_model_dir(ctx.opt);
  const PreparedData p = prepare_data(ctx.data_dir(), ck.config);
  const auto files = write_plots(ctx.out_dir(), collect_plot_inputs(*ck.model, p, ck.config));
  for (const auto& f : files) ctx.out << f.string() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options opt;
  CLI::App app{"Traffic forecasting on road-sensor graphs", "bgcn"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.add_option("--config", opt.config_path, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", opt.seed, "root seed (overrides the config)");
  app.add_option("--out", opt.out, "output directory");
  app.add_option("--data", opt.data, "dataset directory");
  app.add_option("--set", opt.sets, "config override, key=value (repeatable)");
  app.add_flag("--quiet", opt.quiet, "no per-epoch progress");

  std::function<void(Context&)> action;
  auto sub = [&](const char* name, const char* help, void (*fn)(Context&)) {
    CLI::App* s = app.add_subcommand(name, help);
    s->callback([&action, fn] { action = fn; });
    return s;
  };

  CLI::App* synth = sub("synth", "generate a synthetic dataset", cmd_synth);
  synth->add_option("--nodes", opt.synth.n_nodes);
  synth->add_option("--days", opt.synth.days);
  synth->add_option("--amplitude", opt.synth.daily_amplitude);
  synth->add_option("--noise", opt.synth.noise_std);
  synth->add_option("--negative-fraction", opt.synth.negative_edge_fraction);
  synth->add_option("--rho", opt.synth.rho);
  synth->add_option("--neighbors", opt.synth.neighbors);
  std::string ground_truth;
  synth->add_option("--graph", ground_truth, "ground-truth graph CSV (default: generated)")->check(CLI::ExistingFile);

  sub("prepare", "ingest, build the observed graph, normalize and window", cmd_prepare);
  sub("embed", "train node embeddings on the observed graph", cmd_embed);
  sub("infer-graph", "infer the MAP constant graph", cmd_infer_graph);
  sub("train", "train a model and write checkpoints", cmd_train);
  for (CLI::App* s : {sub("eval", "evaluate a checkpoint", cmd_eval), sub("predict", "predict one window", cmd_predict),
                      sub("plot", "emit figures with numeric sidecars", cmd_plot)}) {
    s->add_option("--model", opt.model_dir, "directory holding best.ckpt / final.ckpt");
    s->add_option("--checkpoint", opt.checkpoint, "best or final")->check(CLI::IsMember({"best", "final"}));
    if (s->get_name() != "plot") s->add_option("--split", opt.split, "train, val or test");
  }
  app.get_subcommand("predict")->add_option("--window", opt.window, "window index within the split");
  sub("ablate", "train the ablation variants", cmd_ablate)
      ->add_option("--rows", opt.rows, "full, no-uncertainty, no-phi, no-constant")
      ->delimiter(',');
  sub("sweep-dropout", "train one model per dropout rate", cmd_sweep)
      ->add_option("--rates", opt.rates, "dropout rates in [0, 1)")
      ->delimiter(',');

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  }

  try {
    if (!ground_truth.empty()) opt.synth.ground_truth_graph = load_matrix_csv(ground_truth);
    Context ctx{opt, resolve_config(opt), out, err};
    action(ctx);
    return exit_ok;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return exit_divergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_data;
  }
}

}  // namespace bgcn
