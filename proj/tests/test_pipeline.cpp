#include "bgcn/pipeline.hpp"
#include "bgcn/synth.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace bgcn;
using bgcn::testing::read_bytes;
using bgcn::testing::TempDir;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.seed = 4;
  c.gvae.epochs = 20;
  c.model.dilations = {1, 2, 4};
  c.model.layers = 3;
  c.model.residual_channels = 4;
  c.model.skip_channels = 4;
  c.model.end_channels = 8;
  c.model.t_in = 6;
  c.model.horizon = 3;
  c.train.epochs = 2;
  c.train.lr_drop_epoch = 2;
  c.train.batch_size = 16;
  c.train.max_batches_per_epoch = 3;
  return c;
}

SyntheticData small_synth() {
  SyntheticSpec spec;
  spec.n_nodes = 6;
  spec.days = 2;
  spec.seed = 1;
  return generate_synthetic(spec);
}

}  // namespace

TEST_CASE("prepare from files") {
  TempDir dir("prep");
  SyntheticSpec spec;
  spec.n_nodes = 6;
  spec.days = 2;
  write_synthetic(dir.path(), spec, generate_synthetic(spec));
  const ExperimentConfig cfg = small_config();
  const PreparedData p = prepare_data(dir.path(), cfg);
  CHECK(p.data->num_nodes() == 6);
  CHECK(p.road.epsilon == 0.1);
  CHECK(p.road.xi > 0);
  CHECK(p.splits.boundary_train_val == 345);
  CHECK(p.splits.train.size() == 345 - 8);
  CHECK(p.train_steps == 345);
  CHECK(std::abs(p.data->values[0].leftCols(345).mean()) < 1e-9);

  SUBCASE("missing distance file names the path") {
    std::filesystem::remove(dir / "distances.csv");
    try {
      prepare_data(dir.path(), cfg);
      FAIL("expected an error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("distances.csv") != std::string::npos);
    }
  }
  SUBCASE("mismatched node id file") {
    bgcn::testing::write_text(dir / "node_ids.txt", "a\nb\n");
    CHECK_THROWS_AS(prepare_data(dir.path(), cfg), DataError);
  }
}

TEST_CASE("constant graph inference") {
  const SyntheticData s = small_synth();
  const ExperimentConfig cfg = small_config();
  const PreparedData p = prepare_tensor(s.flow, s.distances, cfg);
  const ConstantGraph g = infer_constant_graph(p.road, cfg);
  CHECK(g.embeddings.vectors.rows() == 6);
  CHECK(g.distances.rows() == 6);
  CHECK(g.map.converged);
  CHECK((g.adjacency - g.adjacency.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((g.adjacency.array() >= 0).all());
  const ConstantGraph again = infer_constant_graph(p.road, cfg);
  CHECK((again.adjacency.array() == g.adjacency.array()).all());
}

TEST_CASE("ablation rows") {
  const ExperimentConfig cfg = small_config();
  CHECK(ablation_config(cfg, Ablation::no_uncertainty).model.dropout_rate == 0.0);
  CHECK_FALSE(ablation_config(cfg, Ablation::no_phi).model.learn_phi);
  const MatrixXd c = MatrixXd::Constant(3, 3, 0.2);
  CHECK(ablation_constant(c, Ablation::no_constant) == MatrixXd::Identity(3, 3));
  CHECK(ablation_constant(c, Ablation::full) == c);
  CHECK(parse_ablation("no-phi") == Ablation::no_phi);
  CHECK_THROWS_AS(parse_ablation("no-everything"), UsageError);

  const SyntheticData s = small_synth();
  const PreparedData p = prepare_tensor(s.flow, s.distances, cfg);
  const MatrixXd a = infer_constant_graph(p.road, cfg).adjacency;
  const auto rows = run_ablation(p, a, cfg, {Ablation::full, Ablation::no_phi, Ablation::full});
  REQUIRE(rows.size() == 3);
  CHECK_FALSE(rows[0].error.has_value());
  // Full row equals a plain training run, and identical rows agree.
  const RunResult plain = run_training(p, a, cfg, "plain");
  CHECK(rows[0].report.to_jsonl() == plain.report.to_jsonl());
  CHECK(rows[2].report.to_jsonl() == rows[0].report.to_jsonl());
  CHECK(rows[0].val_best.average.mae == plain.val_best.average.mae);
  CHECK(rows[1].model->phi().cwiseAbs().maxCoeff() == 0.0);

  const std::string table = results_csv(rows);
  CHECK(table.rfind("variant,best_epoch,val_mae", 0) == 0);
  CHECK(std::count(table.begin(), table.end(), '\n') == 4);
}

TEST_CASE("failed rows are recorded and the table continues") {
  ExperimentConfig cfg = small_config();
  const SyntheticData s = small_synth();
  const PreparedData p = prepare_tensor(s.flow, s.distances, cfg);
  const auto rows = run_ablation(p, MatrixXd::Identity(5, 5), cfg, {Ablation::full, Ablation::no_constant});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].error.has_value());
  CHECK_FALSE(rows[1].error.has_value());
  CHECK(results_csv(rows).find("constant graph") != std::string::npos);
}

TEST_CASE("dropout sweep") {
  const ExperimentConfig cfg = small_config();
  const SyntheticData s = small_synth();
  const PreparedData p = prepare_tensor(s.flow, s.distances, cfg);
  const MatrixXd a = infer_constant_graph(p.road, cfg).adjacency;
  const auto single = sweep_dropout(p, a, cfg, {0.5});
  REQUIRE(single.size() == 1);
  CHECK(single[0].name == "0.5");
  CHECK(single[0].report.to_jsonl() == run_training(p, a, cfg, "x").report.to_jsonl());
  CHECK_THROWS_AS(sweep_dropout(p, a, cfg, {0.5, 1.0}), UsageError);
  const auto& grid = default_dropout_grid();
  CHECK(std::find(grid.begin(), grid.end(), 0.5) != grid.end());
  CHECK(grid.size() == 5);
}

TEST_CASE("checkpoint round trip") {
  const ExperimentConfig cfg = small_config();
  const SyntheticData s = small_synth();
  const PreparedData p = prepare_tensor(s.flow, s.distances, cfg);
  const RunResult r = run_training(p, MatrixXd::Identity(6, 6), cfg, "ckpt");
  TempDir dir("ckpt");
  save_checkpoint(dir / "model.ckpt", *r.model, cfg);
  const Checkpoint c = load_checkpoint(dir / "model.ckpt");
  CHECK(c.model->config().num_nodes == 6);
  CHECK(c.config.train.epochs == cfg.train.epochs);
  for (std::size_t i = 0; i < r.model->parameters().size(); ++i)
    CHECK((c.model->parameters()[i].value.array() == r.model->parameters()[i].value.array()).all());
  const auto v = evaluate_model(*c.model, p.splits.val, 0, 0);
  CHECK(v.average.mae == r.val_best.average.mae);
  save_checkpoint(dir / "again.ckpt", *c.model, c.config);
  CHECK(read_bytes(dir / "again.ckpt") == read_bytes(dir / "model.ckpt"));

  SUBCASE("rejects other versions and foreign files") {
    std::string bytes = read_bytes(dir / "model.ckpt");
    bytes[8] = 7;
    bgcn::testing::write_text(dir / "v7.ckpt", bytes);
    CHECK_THROWS_AS(load_checkpoint(dir / "v7.ckpt"), DataError);
    bgcn::testing::write_text(dir / "junk.ckpt", "hello");
    CHECK_THROWS_AS(load_checkpoint(dir / "junk.ckpt"), DataError);
  }
}

TEST_CASE("metric table text") {
  MetricReport r;
  MetricValues v;
  v.mae = 1.5;
  v.rmse = 2.0;
  r.horizons = {v};
  r.average = v;
  const std::string t = metric_table(r);
  CHECK(t.find("undefined") != std::string::npos);
  CHECK(t.find("average") != std::string::npos);
}
