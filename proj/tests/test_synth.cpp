#include "bgcn/metrics.hpp"
#include "bgcn/synth.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace bgcn;
using bgcn::testing::read_bytes;
using bgcn::testing::TempDir;

TEST_CASE("synthetic series shape and ground truth") {
  SyntheticSpec spec;
  spec.n_nodes = 12;
  spec.days = 2;
  spec.seed = 3;
  const SyntheticData d = generate_synthetic(spec);
  CHECK(d.flow.num_nodes() == 12);
  CHECK(d.flow.num_steps() == 2 * 288);
  CHECK(d.flow.interval_minutes == 5);
  CHECK(d.ground_truth_graph.rows() == 12);
  CHECK((d.ground_truth_graph.array() < 0).count() >= 1);
  CHECK(d.spectral_radius < 1.0);
  CHECK(d.ground_truth_graph.diagonal().cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.flow.values[0].allFinite());
  // Every ground-truth edge has a recorded road distance.
  for (Index i = 0; i < 12; ++i)
    for (Index j = 0; j < 12; ++j)
      if (d.ground_truth_graph(i, j) != 0) CHECK(d.distances.count({i, j}) == 1);
}

TEST_CASE("no negative edges when the fraction is zero") {
  SyntheticSpec spec;
  spec.days = 1;
  spec.negative_edge_fraction = 0.0;
  CHECK((generate_synthetic(spec).ground_truth_graph.array() < 0).count() == 0);
}

TEST_CASE("noise-free series is daily periodic and HA is exact") {
  SyntheticSpec spec;
  spec.n_nodes = 5;
  spec.days = 9;
  spec.noise_std = 0.0;
  const SyntheticData d = generate_synthetic(spec);
  const MatrixXd& v = d.flow.values[0];
  CHECK((v.leftCols(288) - v.middleCols(288, 288)).cwiseAbs().maxCoeff() == 0.0);
  const Index train_steps = 8 * 288;
  const HistoricalAverage ha(d.flow, train_steps);
  double worst = 0;
  for (Index t = train_steps; t < v.cols(); ++t)
    worst = std::max(worst, (ha.predict(d.flow.time_minutes[static_cast<std::size_t>(t)]) - v.col(t)).cwiseAbs().maxCoeff());
  CHECK(worst < 1e-9);
}

TEST_CASE("unstable propagation is rejected") {
  SyntheticSpec spec;
  spec.n_nodes = 3;
  spec.days = 1;
  spec.neighbors = 2;
  spec.rho = 1.0;
  spec.ground_truth_graph = MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(generate_synthetic(spec), DataError);
  spec.rho = 0.5;
  CHECK_NOTHROW(generate_synthetic(spec));
}

TEST_CASE("invalid specs") {
  SyntheticSpec spec;
  spec.negative_edge_fraction = 1.0;
  CHECK_THROWS_AS(generate_synthetic(spec), UsageError);
  spec = SyntheticSpec{};
  spec.n_nodes = 1;
  CHECK_THROWS_AS(generate_synthetic(spec), UsageError);
}

TEST_CASE("same seed writes byte-identical files") {
  SyntheticSpec spec;
  spec.n_nodes = 6;
  spec.days = 1;
  spec.seed = 8;
  TempDir a("synth_a"), b("synth_b");
  write_synthetic(a.path(), spec, generate_synthetic(spec));
  write_synthetic(b.path(), spec, generate_synthetic(spec));
  for (const char* name : {"flow.csv", "distances.csv", "node_ids.txt", "ground_truth_graph.csv", "synth.json"}) {
    INFO(name);
    const std::string bytes = read_bytes(a / name);
    CHECK_FALSE(bytes.empty());
    CHECK(bytes == read_bytes(b / name));
  }
  spec.seed = 9;
  TempDir c("synth_c");
  write_synthetic(c.path(), spec, generate_synthetic(spec));
  CHECK(read_bytes(a / "flow.csv") != read_bytes(c / "flow.csv"));
  // Files load back through the regular readers.
  const TrafficTensor t = load_traffic_csv(a / "flow.csv");
  CHECK(t.num_steps() == 288);
  CHECK(load_matrix_csv(a / "ground_truth_graph.csv").rows() == 6);
}
