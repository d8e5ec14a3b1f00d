#include "bgcn/graph_ops.hpp"
#include "bgcn/training.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace bgcn;
using bgcn::testing::random_matrix;
using bgcn::testing::tiny_config;

namespace {

std::shared_ptr<const TrafficTensor> small_series(Index nodes, Index steps, std::uint64_t seed) {
  Rng rng(seed);
  TrafficTensor t;
  t.values = {MatrixXd(nodes, steps)};
  t.feature_names = {"flow"};
  for (Index n = 0; n < nodes; ++n) t.node_ids.push_back(std::to_string(n));
  for (Index s = 0; s < steps; ++s) {
    t.time_minutes.push_back(5.0 * static_cast<double>(s));
    for (Index n = 0; n < nodes; ++n)
      t.values[0](n, s) = 100 + 30 * std::sin(0.3 * static_cast<double>(s) + static_cast<double>(n)) + rng.normal();
  }
  return std::make_shared<const TrafficTensor>(zscore_fit_transform(t, 0.6));
}

TrainConfig quick_train(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.lr_drop_epoch = epochs;
  c.batch_size = 8;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("learning rate schedule") {
  TrainConfig c;
  CHECK(c.learning_rate(1) == 1e-3);
  CHECK(c.learning_rate(49) == 1e-3);
  CHECK(c.learning_rate(50) == 1e-4);
  CHECK(c.learning_rate(100) == 1e-4);
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    TrainConfig r;
    r.epochs = 1 + static_cast<int>(rng.below(200));
    r.lr_drop_epoch = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(r.epochs)));
    r.lr_init = rng.uniform(1e-4, 1e-1);
    r.lr_after = r.lr_init * rng.uniform(0.01, 0.99);
    CHECK_NOTHROW(r.validate());
    for (int e = 1; e <= r.epochs; ++e) CHECK(r.learning_rate(e) == (e < r.lr_drop_epoch ? r.lr_init : r.lr_after));
  }
}

TEST_CASE("train config validation") {
  TrainConfig c;
  c.lr_after = c.lr_init;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = TrainConfig{};
  c.lr_drop_epoch = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = TrainConfig{};
  c.lr_drop_epoch = c.epochs + 1;
  CHECK_THROWS_AS(c.validate(), UsageError);
  CHECK(parse_sample_scope("epoch") == SampleScope::epoch);
  CHECK_THROWS_AS(parse_sample_scope("never"), UsageError);
}

TEST_CASE("training runs, reports every epoch and is reproducible") {
  const auto data = small_series(4, 120, 1);
  const WindowSplits splits = make_windows(data, 6, 2);
  auto cfg = tiny_config();
  Rng rng(2);
  const MatrixXd a = normalize_adjacency(random_matrix(4, 4, rng, 0, 1));

  for (SampleScope scope : {SampleScope::batch, SampleScope::epoch}) {
    TrainConfig tc = quick_train(4);
    tc.graph_sample_scope = scope;
    ForecastModel m1(cfg, a, 3), m2(cfg, a, 3);
    int callbacks = 0;
    const TrainReport r1 = train(m1, splits, tc, [&](const EpochRecord&) { ++callbacks; });
    const TrainReport r2 = train(m2, splits, tc);
    CHECK(callbacks == 4);
    CHECK(r1.epochs.size() == 4);
    CHECK(r1.to_jsonl() == r2.to_jsonl());
    for (std::size_t p = 0; p < m1.parameters().size(); ++p)
      CHECK((m1.parameters()[p].value.array() == m2.parameters()[p].value.array()).all());
    CHECK(r1.epochs.back().train_loss < r1.epochs.front().train_loss);
  }
}

TEST_CASE("report lines are machine-readable") {
  const auto data = small_series(4, 80, 1);
  ForecastModel m(tiny_config(), MatrixXd::Identity(4, 4), 0);
  const TrainReport r = train(m, make_windows(data, 6, 2), quick_train(2));
  const std::string jsonl = r.to_jsonl();
  CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 2);
  CHECK(jsonl.find("\"epoch\":1,") != std::string::npos);
  CHECK(jsonl.find("wall_seconds") == std::string::npos);
  CHECK(r.to_jsonl(true).find("wall_seconds") != std::string::npos);
}

TEST_CASE("frozen parameters keep losses constant") {
  const auto data = small_series(4, 100, 2);
  auto cfg = tiny_config();
  cfg.dropout_rate = 0.0;
  ForecastModel m(cfg, MatrixXd::Identity(4, 4), 1);
  const auto before = snapshot_parameters(m);
  TrainConfig tc = quick_train(3);
  tc.freeze = true;
  const TrainReport r = train(m, make_windows(data, 6, 2), tc);
  for (const auto& e : r.epochs) {
    CHECK(e.train_loss == doctest::Approx(r.epochs[0].train_loss).epsilon(1e-12));
    CHECK(e.val.mae == r.epochs[0].val.mae);
  }
  for (std::size_t p = 0; p < before.size(); ++p) CHECK((before[p].array() == m.parameters()[p].value.array()).all());
}

TEST_CASE("single window overfit") {
  const auto data = small_series(4, 40, 3);
  WindowSplits splits = make_windows(data, 6, 2);
  splits.train.starts = {0};
  splits.val.starts = {splits.val.starts.front()};
  auto cfg = tiny_config();
  cfg.dropout_rate = 0.0;
  cfg.residual_channels = 8;
  cfg.skip_channels = 16;
  cfg.end_channels = 16;
  ForecastModel m(cfg, MatrixXd::Identity(4, 4), 9);
  TrainConfig tc = quick_train(500);
  tc.batch_size = 1;
  tc.lr_init = 1e-2;
  tc.lr_after = 1e-3;
  tc.lr_drop_epoch = 400;
  const TrainReport r = train(m, splits, tc);
  CHECK(r.epochs.back().train_loss < 1e-2);
}

TEST_CASE("phi receives gradient on the first step") {
  const auto data = small_series(4, 60, 4);
  const WindowSplits splits = make_windows(data, 6, 2);
  ForecastModel m(tiny_config(), normalize_adjacency(MatrixXd::Ones(4, 4)), 2);
  Rng rng(1);
  GraphSampler sampler = GraphSampler::fresh(rng);
  const auto trace = m.forward_trace(splits.train.input(0), true, sampler);
  auto grads = m.zero_gradients();
  const MatrixXd diff = trace.output - splits.train.target(0);
  m.backward(trace, diff.unaryExpr([](double e) { return e > 0 ? 1.0 : -1.0; }), grads);
  const auto& params = m.parameters();
  for (std::size_t p = 0; p < params.size(); ++p)
    if (params[p].name == "phi") CHECK(grads[p].cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("best checkpoint reloads to the recorded validation metric") {
  const auto data = small_series(4, 120, 5);
  const WindowSplits splits = make_windows(data, 6, 2);
  ForecastModel m(tiny_config(), MatrixXd::Identity(4, 4), 4);
  const TrainReport r = train(m, splits, quick_train(5));
  load_parameters(m, r.best_parameters);
  const MetricReport v = evaluate_model(m, splits.val, 0, 0);
  CHECK(v.average.mae == r.best_val_mae);
  CHECK(r.epochs[static_cast<std::size_t>(r.best_epoch - 1)].val.mae == r.best_val_mae);
  for (const auto& e : r.epochs) CHECK(e.val.mae >= r.best_val_mae);
}

TEST_CASE("training errors") {
  auto cfg = tiny_config();
  SUBCASE("empty training split") {
    const auto data = small_series(4, 60, 6);
    WindowSplits splits = make_windows(data, 6, 2);
    splits.train.starts.clear();
    ForecastModel m(cfg, MatrixXd::Identity(4, 4), 0);
    CHECK_THROWS_AS(train(m, splits, quick_train(1)), DataError);
  }
  SUBCASE("non-finite loss reports epoch and batch") {
    TrafficTensor t = *small_series(4, 60, 7);
    t.values[0](0, 7) = std::numeric_limits<double>::infinity();
    const auto data = std::make_shared<const TrafficTensor>(t);
    ForecastModel m(cfg, MatrixXd::Identity(4, 4), 0);
    try {
      train(m, make_windows(data, 6, 2), quick_train(1));
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
      CHECK(std::string(e.what()).find("batch") != std::string::npos);
    }
  }
  SUBCASE("window shape mismatch") {
    const auto data = small_series(4, 60, 8);
    ForecastModel m(cfg, MatrixXd::Identity(4, 4), 0);
    CHECK_THROWS_AS(train(m, make_windows(data, 5, 2), quick_train(1)), ShapeError);
  }
}
