#include "bgcn/bgcn.hpp"
#include "bgcn/graph_ops.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace bgcn;
using bgcn::testing::random_matrix;

namespace {

BayesianGraph<double> fixed_graph(double rate) {
  Rng rng(42);
  BayesianGraph<double> g;
  g.constant = normalize_adjacency(random_matrix(4, 4, rng, 0, 1));
  g.phi = random_matrix(4, 4, rng, -0.2, 0.2);
  g.dropout_rate = rate;
  return g;
}

}  // namespace

TEST_CASE("dropout sampling") {
  SUBCASE("evaluation path returns constant + phi") {
    const auto g = fixed_graph(0.5);
    Rng rng(1);
    CHECK((sample_graph(g, false, rng).array() == (g.constant + g.phi).array()).all());
  }
  SUBCASE("rate 0 is exact in training mode") {
    const auto g = fixed_graph(0.0);
    Rng rng(1);
    CHECK((sample_graph(g, true, rng).array() == (g.constant + g.phi).array()).all());
  }
  SUBCASE("entries are zero or scaled by 1/(1-p)") {
    const auto g = fixed_graph(0.3);
    Rng rng(2);
    const MatrixXd s = sample_graph(g, true, rng);
    const MatrixXd m = g.mean_graph();
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 4; ++j)
        CHECK((s(i, j) == 0.0 || std::abs(s(i, j) - m(i, j) / 0.7) < 1e-15));
  }
  SUBCASE("mean of 10000 samples is within 5% of the expectation") {
    const auto g = fixed_graph(0.5);
    Rng rng(3);
    MatrixXd sum = MatrixXd::Zero(4, 4);
    for (int s = 0; s < 10000; ++s) sum += sample_graph(g, true, rng);
    const MatrixXd mean = sum / 10000.0;
    const MatrixXd expected = g.mean_graph();
    CHECK((mean - expected).cwiseAbs().maxCoeff() / expected.cwiseAbs().maxCoeff() < 0.05);
  }
  SUBCASE("invalid rates") {
    Rng rng(0);
    CHECK_THROWS_AS(dropout_mask<double>(2, 2, 1.0, rng), UsageError);
    CHECK_THROWS_AS(dropout_mask<double>(2, 2, -0.1, rng), UsageError);
  }
}

TEST_CASE("graph convolution matches a triple loop") {
  Rng rng(5);
  auto g = fixed_graph(0.5);
  const MatrixXd x = random_matrix(4, 3, rng);
  const MatrixXd w = random_matrix(3, 2, rng);
  Rng r1(9);
  const MatrixXd out = bgcn_forward(x, g, w, false, r1);
  const MatrixXd expected = oracle::matmul(g.mean_graph(), oracle::matmul(x, w));
  CHECK((out - expected).cwiseAbs().maxCoeff() < 1e-12);

  // Training mode: same draw as sample_graph with the same stream.
  Rng r2(9), r3(9);
  const MatrixXd sampled = sample_graph(g, true, r2);
  CHECK((bgcn_forward(x, g, w, true, r3) - oracle::matmul(sampled, oracle::matmul(x, w))).cwiseAbs().maxCoeff() <
        1e-12);

  CHECK_THROWS_AS(bgcn_forward(random_matrix(3, 3, rng), g, w, false, r1), ShapeError);
  CHECK_THROWS_AS(bgcn_forward(x, g, random_matrix(2, 2, rng), false, r1), ShapeError);
}

TEST_CASE("phi may be negative and asymmetric") {
  auto g = fixed_graph(0.0);
  g.phi.setZero();
  g.phi(0, 1) = -0.7;
  Rng rng(0);
  const MatrixXd s = sample_graph(g, true, rng);
  CHECK(s(0, 1) == doctest::Approx(g.constant(0, 1) - 0.7));
  CHECK(s(1, 0) == g.constant(1, 0));
}

TEST_CASE("adaptive adjacency") {
  Rng rng(6);
  const MatrixXd e1 = random_matrix(5, 3, rng), e2 = random_matrix(5, 3, rng);
  const MatrixXd a = adaptive_adjacency(e1, e2);
  for (Index i = 0; i < 5; ++i) {
    CHECK(std::abs(a.row(i).sum() - 1.0) < 1e-12);
    double denom = 0;
    for (Index j = 0; j < 5; ++j) denom += std::exp(std::max(0.0, e1.row(i).dot(e2.row(j))));
    for (Index j = 0; j < 5; ++j) {
      CHECK(a(i, j) >= 0.0);
      CHECK(std::abs(a(i, j) - std::exp(std::max(0.0, e1.row(i).dot(e2.row(j)))) / denom) < 1e-12);
    }
  }
  SUBCASE("zero embeddings give uniform rows") {
    const MatrixXd u = adaptive_adjacency(MatrixXd::Zero(4, 2), MatrixXd::Zero(4, 2));
    CHECK((u.array() - 0.25).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("backward matches finite differences") {
    const MatrixXd upstream = random_matrix(5, 5, rng);
    MatrixXd g1, g2;
    adaptive_adjacency_backward<double>(e1, e2, a, upstream, g1, g2);
    const double h = 1e-6;
    MatrixXd n1(5, 3), n2(5, 3);
    for (Index i = 0; i < 5; ++i)
      for (Index k = 0; k < 3; ++k) {
        MatrixXd p = e1, m = e1;
        p(i, k) += h;
        m(i, k) -= h;
        n1(i, k) = (adaptive_adjacency(p, e2).cwiseProduct(upstream).sum() -
                    adaptive_adjacency(m, e2).cwiseProduct(upstream).sum()) / (2 * h);
        p = e2;
        m = e2;
        p(i, k) += h;
        m(i, k) -= h;
        n2(i, k) = (adaptive_adjacency(e1, p).cwiseProduct(upstream).sum() -
                    adaptive_adjacency(e1, m).cwiseProduct(upstream).sum()) / (2 * h);
      }
    CHECK(bgcn::testing::relative_error(g1, n1) < 1e-6);
    CHECK(bgcn::testing::relative_error(g2, n2) < 1e-6);
  }
}

TEST_CASE("mc predictive variance falls as 1/S") {
  auto config = bgcn::testing::tiny_config();
  Rng rng(13);
  ForecastModel model(config, normalize_adjacency(random_matrix(4, 4, rng, 0, 1)), 7);
  const MatrixXd x = random_matrix(1, 24, rng);
  std::vector<double> log_s, log_var;
  Rng draws(21);
  for (int s : {1, 2, 4, 8, 16, 32}) {
    const int repeats = 300;
    std::vector<double> values;
    for (int r = 0; r < repeats; ++r) values.push_back(mc_predict(model, x, s, draws).mean(0, 0));
    double mean = 0;
    for (double v : values) mean += v;
    mean /= repeats;
    double var = 0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= repeats - 1;
    log_s.push_back(std::log(static_cast<double>(s)));
    log_var.push_back(std::log(var));
  }
  const auto k = static_cast<double>(log_s.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < log_s.size(); ++i) {
    sx += log_s[i];
    sy += log_var[i];
    sxx += log_s[i] * log_s[i];
    sxy += log_s[i] * log_var[i];
  }
  const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  CHECK(slope >= -1.3);
  CHECK(slope <= -0.7);
}
