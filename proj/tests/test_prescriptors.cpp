#include <cmath>
#include <random>

#include "doctest.h"
#include "drolab/error.hpp"
#include "drolab/prescriptors.hpp"
#include "test_support.hpp"

using namespace drolab;

namespace {

Problem demo() { return Problem(LossMatrix::from_rows({{0.5, 0.5}, {0.0, 1.0}})); }

const RegimeSchedule kTwoPercent = RegimeSchedule::table({{100, 2.0}});

LossMatrix abs_grid(std::size_t n_points = 101) {
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < n_points; ++k) {
    const double x = -3.0 + 6.0 * static_cast<double>(k) / static_cast<double>(n_points - 1);
    std::vector<double> row;
    for (int xi = -2; xi <= 2; ++xi) row.push_back(std::abs(x - xi));
    rows.push_back(row);
  }
  return LossMatrix::from_rows(rows);
}

}  // namespace

TEST_CASE("prescribe examples") {
  const EmpiricalDistribution emp({50, 50});
  const auto saa = prescribe(demo(), {PredictorKind::Saa}, emp, kTwoPercent);
  CHECK(saa.decision == 0);
  CHECK(saa.value == 0.5);
  const auto svp = prescribe(demo(), {PredictorKind::Svp}, emp, kTwoPercent);
  CHECK(svp.decision == 0);
  CHECK(svp.value == 0.5);
  CHECK(std::abs(predict_value(demo(), {PredictorKind::Svp}, 1, emp.to_distribution(), 100, kTwoPercent) - 0.6) <= 1e-12);

  const Problem single(LossMatrix::from_rows({{3.0, 1.0}}));
  CHECK(prescribe(single, {PredictorKind::KlDro, 0.2}, emp, kTwoPercent).decision == 0);

  // identical rows: lowest index
  const Problem same(LossMatrix::from_rows({{0.0, 1.0}, {0.0, 1.0}}));
  CHECK(prescribe(same, {PredictorKind::Saa}, emp, kTwoPercent).decision == 0);
}

TEST_CASE("prescribe returns a minimizer with the documented tie-breaks") {
  std::mt19937_64 rng(61);
  const auto sched = RegimeSchedule::power_law(1.0, 0.5);
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 2 + k % 6, d = 2 + k % 4;
    const Problem pr(testing::random_loss(rng, n, d));
    std::vector<std::uint64_t> counts(d);
    for (std::size_t i = 0; i < d; ++i) counts[i] = (k + 3 * i) % 7;
    if (std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}) == 0) counts[0] = 1;
    const EmpiricalDistribution emp(counts);
    const auto p = emp.to_distribution();
    for (auto kind : {PredictorKind::Saa, PredictorKind::Robust, PredictorKind::KlDro, PredictorKind::Svp}) {
      const PredictorSpec spec{kind, kind == PredictorKind::KlDro ? std::optional<double>(0.2) : std::nullopt};
      const auto res = prescribe(pr, spec, emp, sched);
      // brute force
      std::size_t best = 0;
      std::vector<double> vals(n);
      for (std::size_t x = 0; x < n; ++x) vals[x] = predict(pr, spec, x, emp, sched).value;
      for (std::size_t x = 1; x < n; ++x) {
        if (vals[x] < vals[best] - 1e-12) {
          best = x;
        } else if (std::abs(vals[x] - vals[best]) <= 1e-12 && variance(pr, x, p) < variance(pr, best, p)) {
          best = x;
        }
      }
      CHECK(res.decision == best);
      CHECK(res.value == vals[res.decision]);
      for (double v : vals) CHECK(res.value <= v + 1e-12);
    }
  }
}

TEST_CASE("robust prescription ignores data and kl prescription ignores T") {
  std::mt19937_64 rng(67);
  for (int k = 0; k < 50; ++k) {
    const Problem pr(testing::random_loss(rng, 5, 3));
    const auto sched = RegimeSchedule::exponential(0.1);
    const auto a = prescribe(pr, {PredictorKind::Robust}, EmpiricalDistribution({1, 2, 3}), sched);
    const auto b = prescribe(pr, {PredictorKind::Robust}, EmpiricalDistribution({9, 0, 1}), sched);
    CHECK(a.decision == b.decision);
    const auto c = prescribe(pr, {PredictorKind::KlDro}, EmpiricalDistribution({1, 2, 3}), sched);
    const auto e = prescribe(pr, {PredictorKind::KlDro}, EmpiricalDistribution({10, 20, 30}), sched);
    CHECK(c.decision == e.decision);
    CHECK(c.value == e.value);
    // kl with r = 0 is saa
    const EmpiricalDistribution emp({4, 1, 2});
    CHECK(prescribe(pr, {PredictorKind::KlDro, 0.0}, emp, sched).decision ==
          prescribe(pr, {PredictorKind::Saa}, emp, sched).decision);
  }
}

TEST_CASE("gap bound examples") {
  const auto g = prescription_gap_bound(demo(), Distribution::uniform(2), 100, kTwoPercent);
  CHECK(g.lower == 0.0);
  CHECK(g.upper == 0.0);
  CHECK(g.gap == 0.0);
  CHECK(g.holds);
  CHECK(g.svp_decision == 0);
}

TEST_CASE("gap sandwich on random problems") {
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> u(1e-4, 0.5);
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 2 + k % 7, d = 2 + k % 5;
    const Problem pr(testing::random_loss(rng, n, d));
    const auto p = testing::random_interior(rng, d);
    const double ratio = u(rng);
    const auto sched = RegimeSchedule::table({{1000, ratio * 1000.0}});
    const auto g = prescription_gap_bound(pr, p, 1000, sched);
    // independent evaluation
    double cstar = cost(pr, 0, p), svp_star = svp_value(pr, 0, p, ratio);
    for (std::size_t x = 1; x < n; ++x) {
      cstar = std::min(cstar, cost(pr, x, p));
      svp_star = std::min(svp_star, svp_value(pr, x, p, ratio));
    }
    const double gap = svp_star - cstar;
    CHECK(std::abs(g.gap - gap) <= 1e-12);
    const double lower = std::sqrt(2.0 * ratio * variance(pr, g.svp_decision, p));
    const double upper = std::sqrt(2.0 * ratio * variance(pr, min_variance_minimizer(pr, p), p));
    CHECK(lower <= gap + 1e-12);
    CHECK(gap <= upper + 1e-12);
    CHECK(g.holds);
  }
}

TEST_CASE("svp prescription reaches the minimal variance minimizer as the ratio vanishes") {
  std::mt19937_64 rng(73);
  int generic = 0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 6, d = 4;
    const Problem pr(testing::random_loss(rng, n, d));
    const auto p = testing::random_interior(rng, d);
    const std::size_t xstar = min_variance_minimizer(pr, p);
    const double ratio = 1e-12;
    const auto sched = RegimeSchedule::table({{1000000, ratio * 1e6}});
    const auto res = prescribe_at(pr, {PredictorKind::Svp}, p, 1000000, sched);
    CHECK(res.decision == xstar);
    CHECK(variance(pr, res.decision, p) == variance(pr, xstar, p));
    ++generic;
  }
  CHECK(generic == 200);
  // engineered tie: two cost minimizers, the lower-variance one wins for any ratio > 0
  const Problem tie(LossMatrix::from_rows({{0.0, 1.0}, {0.5, 0.5}, {0.6, 0.6}}));
  for (double ratio : {1e-10, 1e-6, 1e-2}) {
    const auto sched = RegimeSchedule::table({{100, ratio * 100}});
    CHECK(prescribe_at(tie, {PredictorKind::Svp}, Distribution::uniform(2), 100, sched).decision == 1);
  }
}

TEST_CASE("convexity certificate on the absolute loss grid") {
  const auto grid = abs_grid();
  const auto uni = Distribution::uniform(5);
  // threshold is 0.2 * 0.2
  const auto small = convexity_certificate(grid, uni, 0.5 * 0.01 * 0.01);
  CHECK(small.threshold_ok);
  CHECK(small.midpoint_violations == 0);
  CHECK(small.triples_checked > 0);
  const auto edge = convexity_certificate(grid, uni, 0.5 * 0.04 * 0.04);
  CHECK(edge.threshold_ok);
  CHECK(edge.midpoint_violations == 0);
  CHECK_FALSE(convexity_certificate(grid, uni, 0.5 * 0.041 * 0.041).threshold_ok);
  CHECK(convexity_certificate(grid, uni, 2.0).midpoint_violations > 0);
  CHECK(convexity_certificate(grid, uni, 0.5).midpoint_violations > 0);

  const LossMatrix flat = LossMatrix::from_rows({{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}});
  for (double ratio : {0.0, 0.1, 2.0}) {
    CHECK(convexity_certificate(flat, Distribution::uniform(2), ratio).midpoint_violations == 0);
  }
  CHECK_THROWS(convexity_certificate(LossMatrix::from_rows({{0.0, 1.0}, {1.0, 0.0}}),
                                     Distribution::uniform(2), 0.1));
  // schedule overload
  const auto via_sched = convexity_certificate(grid, EmpiricalDistribution({2, 2, 2, 2, 2}),
                                               RegimeSchedule::table({{10, 10 * 5e-5}}));
  CHECK(via_sched.threshold_ok);
  CHECK(via_sched.midpoint_violations == 0);
}
