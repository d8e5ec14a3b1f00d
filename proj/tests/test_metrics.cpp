#include "bgcn/metrics.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace bgcn;
using bgcn::testing::random_matrix;

namespace {

MatrixXd row(std::initializer_list<double> values) {
  MatrixXd m(1, static_cast<Index>(values.size()));
  Index i = 0;
  for (double v : values) m(0, i++) = v;
  return m;
}

TrafficTensor periodic_series(Index nodes, Index steps, Index period, double offset = 0.0) {
  TrafficTensor t;
  t.values = {MatrixXd(nodes, steps)};
  t.feature_names = {"flow"};
  for (Index n = 0; n < nodes; ++n) t.node_ids.push_back(std::to_string(n));
  for (Index s = 0; s < steps; ++s) {
    t.time_minutes.push_back(5.0 * static_cast<double>(s));
    for (Index n = 0; n < nodes; ++n)
      t.values[0](n, s) = 50 + 10 * n + 20 * std::sin(2 * M_PI * static_cast<double>(s % period) / period) + offset;
  }
  return t;
}

}  // namespace

TEST_CASE("mae loss") {
  CHECK(mae_loss(row({1, 2}), row({1, 2})) == 0.0);
  CHECK(mae_loss(row({1, 2, 3}), row({3.5, 4.5, 5.5})) == doctest::Approx(2.5));
  CHECK(mae_loss(row({1, 2}), row({2, 4})) == doctest::Approx(1.5));
  CHECK_THROWS_AS(mae_loss(row({1, 2}), row({1, 2, 3})), ShapeError);
  CHECK_THROWS_AS(mae_loss(row({1, NAN}), row({1, 2})), DataError);
}

TEST_CASE("metric hand values") {
  SUBCASE("perfect prediction") {
    const auto r = metrics(row({3, 4}), row({3, 4}));
    CHECK(r.average.mae == 0.0);
    CHECK(r.average.rmse == 0.0);
    CHECK(*r.average.mape == 0.0);
  }
  SUBCASE("single element") {
    const auto r = metrics(row({110}), row({100}));
    CHECK(r.average.mae == doctest::Approx(10));
    CHECK(r.average.rmse == doctest::Approx(10));
    CHECK(*r.average.mape == doctest::Approx(10));
  }
  SUBCASE("rmse above mae") {
    const auto r = metrics(row({1, 3}), row({1, 1}));
    CHECK(r.average.mae == doctest::Approx(1.0));
    CHECK(r.average.rmse == doctest::Approx(std::sqrt(2.0)));
  }
  SUBCASE("zero targets are masked from MAPE and counted") {
    const auto r = metrics(row({1, 11}), row({0, 10}));
    CHECK(r.masked == 1);
    CHECK(*r.average.mape == doctest::Approx(10));
    CHECK(r.average.mae == doctest::Approx(1));
  }
  SUBCASE("all targets masked leaves MAPE undefined") {
    const auto r = metrics(row({1, 2}), row({0, 0}));
    CHECK_FALSE(r.average.mape.has_value());
  }
  SUBCASE("per-horizon rows average to the overall metric") {
    Rng rng(3);
    const MatrixXd p = random_matrix(6, 5, rng, 1, 10), t = random_matrix(6, 5, rng, 1, 10);
    const auto r = metrics(p, t, 3, 2);
    REQUIRE(r.horizons.size() == 3);
    double mean_mae = 0, mean_mape = 0;
    for (const auto& h : r.horizons) mean_mae += h.mae / 3, mean_mape += *h.mape / 3;
    CHECK(r.average.mae == doctest::Approx(mean_mae).epsilon(1e-12));
    CHECK(*r.average.mape == doctest::Approx(mean_mape).epsilon(1e-12));
    CHECK(r.horizons[1].mae == doctest::Approx((p.middleRows(2, 2) - t.middleRows(2, 2)).cwiseAbs().mean()));
  }
}

TEST_CASE("metric properties on random tensors") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const Index h = 1 + static_cast<Index>(rng.below(4)), n = 1 + static_cast<Index>(rng.below(10));
    const MatrixXd p = random_matrix(h, n, rng, -50, 50), t = random_matrix(h, n, rng, -50, 50);
    const auto r = metrics(p, t, h);
    CHECK(r.average.rmse >= r.average.mae - 1e-12);
    for (const auto& v : r.horizons) CHECK(v.rmse >= v.mae - 1e-12);
    // Node permutation invariance.
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    rng.shuffle(perm);
    MatrixXd pp(h, n), tp(h, n);
    for (Index c = 0; c < n; ++c) {
      pp.col(c) = p.col(perm[static_cast<std::size_t>(c)]);
      tp.col(c) = t.col(perm[static_cast<std::size_t>(c)]);
    }
    const auto q = metrics(pp, tp, h);
    CHECK(q.average.mae == doctest::Approx(r.average.mae).epsilon(1e-12));
    CHECK(q.average.rmse == doctest::Approx(r.average.rmse).epsilon(1e-12));
  }
}

TEST_CASE("historical average") {
  const Index week = 2016;
  SUBCASE("two weeks v and v+2 average to v+1") {
    TrafficTensor t = periodic_series(2, 2 * week, week);
    t.values[0].rightCols(week).array() += 2.0;
    const HistoricalAverage ha(t, 2 * week);
    const MatrixXd p = ha.predict(5.0 * 37);
    CHECK(p(0, 0) == doctest::Approx(t.values[0](0, 37) + 1.0));
    CHECK(p(1, 0) == doctest::Approx(t.values[0](1, 37) + 1.0));
    CHECK(ha.full_coverage());
    CHECK_FALSE(ha.used_fallback());
  }
  SUBCASE("exact on a weekly periodic series, idempotent on its training span") {
    const TrafficTensor t = periodic_series(3, 3 * week, 288);
    const HistoricalAverage ha(t, 2 * week);
    double worst = 0;
    for (Index s = 0; s < 3 * week; s += 7)
      worst = std::max(worst, (ha.predict(t.time_minutes[static_cast<std::size_t>(s)]) - t.values[0].col(s)).cwiseAbs().maxCoeff());
    CHECK(worst < 1e-9);
  }
  SUBCASE("needs a full week of history") {
    const TrafficTensor t = periodic_series(1, week - 1, 288);
    CHECK_THROWS_AS(HistoricalAverage(t, week - 1), DataError);
  }
  SUBCASE("missing phase falls back to the overall mean and flags it") {
    TrafficTensor t = periodic_series(1, week + 10, 288);
    // Remove the steps of phase 100 by shifting their timestamps into phase 101.
    t.time_minutes[100] = 5.0 * 101;
    const HistoricalAverage ha(t, week + 10);
    CHECK_FALSE(ha.full_coverage());
    const MatrixXd p = ha.predict(5.0 * 100);
    CHECK(ha.used_fallback());
    CHECK(p(0, 0) == doctest::Approx(t.values[0].row(0).mean()));
  }
  SUBCASE("free function form") {
    const TrafficTensor t = periodic_series(2, week, 288);
    bool fallback = true;
    const auto preds = historical_average(t, {0.0, 5.0 * 3}, &fallback);
    CHECK_FALSE(fallback);
    REQUIRE(preds.size() == 2);
    CHECK(preds[1](1, 0) == doctest::Approx(t.values[0](1, 3)));
  }
}
