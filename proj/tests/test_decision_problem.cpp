#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "drolab/decision_problem.hpp"
#include "drolab/error.hpp"
#include "test_support.hpp"

using namespace drolab;

namespace {

Problem demo() { return Problem(LossMatrix::from_rows({{0.5, 0.5}, {0.0, 1.0}})); }

}  // namespace

TEST_CASE("loss matrix invariants") {
  const LossMatrix m = LossMatrix::from_rows({{1.0, -3.5}, {2.0, 0.0}, {0.5, 0.5}});
  CHECK(m.decisions() == 3);
  CHECK(m.scenarios() == 2);
  CHECK(m.sup_norm() == 3.5);
  CHECK(m.decision_labels()[2] == "x2");
  CHECK_THROWS_AS(LossMatrix::from_rows({{1.0}, {2.0}}), ValidationError);
  CHECK_THROWS_AS(LossMatrix::from_rows({{1.0, NAN}}), ValidationError);
  CHECK_THROWS_AS(LossMatrix::from_rows({{1.0, INFINITY}}), ValidationError);
  CHECK_THROWS_AS(LossMatrix(1, 2, {0.0, 1.0}, {"a", "b"}), ValidationError);
}

TEST_CASE("cost examples") {
  const Problem pr = demo();
  CHECK(cost(pr, 1, Distribution::uniform(2)) == 0.5);
  CHECK(cost(pr, 1, Distribution::vertex(2, 0)) == 0.0);
  CHECK(cost(pr, 1, Distribution::vertex(2, 1)) == 1.0);
  CHECK_THROWS(cost(pr, 2, Distribution::uniform(2)));
}

TEST_CASE("cost is linear in the distribution") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 300; ++k) {
    const std::size_t d = 2 + k % 6;
    const Problem pr(testing::random_loss(rng, 3, d, -5.0, 5.0));
    const auto p = testing::random_weights(rng, d), q = testing::random_weights(rng, d);
    const double lam = u(rng);
    std::vector<double> mix(d);
    for (std::size_t i = 0; i < d; ++i) mix[i] = lam * p[i] + (1.0 - lam) * q[i];
    for (std::size_t x = 0; x < 3; ++x) {
      const double lhs = cost(pr, x, Distribution(mix));
      const double rhs = lam * cost(pr, x, Distribution(p)) + (1.0 - lam) * cost(pr, x, Distribution(q));
      CHECK(std::abs(lhs - rhs) <= 1e-12);
    }
  }
}

TEST_CASE("variance and covariance examples") {
  const Problem pr(LossMatrix::from_rows({{0.0, 1.0}, {1.0, 0.0}, {0.7, 0.7}}));
  const auto half = Distribution::uniform(2);
  CHECK(variance(pr, 0, half) == doctest::Approx(0.25));
  CHECK(variance(pr, 2, half) == 0.0);
  CHECK(variance(pr, 0, Distribution::vertex(2, 1)) == 0.0);
  CHECK(covariance(pr, 0, 1, half) == doctest::Approx(-0.25));
  CHECK(covariance(pr, 0, 0, half) == variance(pr, 0, half));
  CHECK(covariance(pr, 2, 0, half) == 0.0);
}

TEST_CASE("covariance properties on random instances") {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 300; ++k) {
    const std::size_t d = 2 + k % 6;
    const Problem pr(testing::random_loss(rng, 3, d, -2.0, 3.0));
    const auto p = testing::random_interior(rng, d, 0.0);
    for (std::size_t a = 0; a < 3; ++a) {
      CHECK(variance(pr, a, p) == covariance(pr, a, a, p));
      CHECK(variance(pr, a, p) >= 0.0);
      for (std::size_t b = 0; b < 3; ++b) {
        const double c = covariance(pr, a, b, p);
        CHECK(std::abs(c - covariance(pr, b, a, p)) <= 1e-15);
        CHECK(c * c <= variance(pr, a, p) * variance(pr, b, p) + 1e-12);
      }
    }
  }
}

TEST_CASE("min variance minimizer") {
  CHECK(min_variance_minimizer(demo(), Distribution::uniform(2)) == 0);
  const Problem unique(LossMatrix::from_rows({{1.0, 1.0}, {0.0, 1.0}}));
  CHECK(min_variance_minimizer(unique, Distribution::uniform(2)) == 1);
  const Problem same(LossMatrix::from_rows({{0.2, 0.9}, {0.2, 0.9}, {0.2, 0.9}}));
  CHECK(min_variance_minimizer(same, Distribution({0.3, 0.7})) == 0);
}

TEST_CASE("min variance minimizer is stable under loss shifts") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> level(0, 3);
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 5, d = 3;
    // coarse integer losses so exact cost ties occur
    std::vector<double> v(n * d);
    for (auto& x : v) x = level(rng);
    std::vector<double> shifted(v);
    for (auto& x : shifted) x += 2.5;
    const Distribution p({0.25, 0.25, 0.5});
    CHECK(min_variance_minimizer(Problem(LossMatrix(n, d, v)), p) ==
          min_variance_minimizer(Problem(LossMatrix(n, d, shifted)), p));
  }
}

TEST_CASE("scenario parsing") {
  const char* ok = R"({"schema_version": 1, "decision_labels": ["A", "B"],
    "scenario_labels": ["lo", "hi"], "loss": [[0.5, 0.5], [0.0, 1.0]], "true_dist": [0.5, 0.5]})";
  const Problem pr = parse_scenario(ok);
  CHECK(pr.decisions() == 2);
  CHECK(pr.loss(1, 1) == 1.0);
  CHECK(pr.loss.scenario_labels()[1] == "hi");
  REQUIRE(pr.true_dist);
  CHECK((*pr.true_dist)[0] == 0.5);

  // round trip
  const Problem back = parse_scenario(scenario_to_json(pr));
  CHECK(back.loss(1, 0) == 0.0);
  CHECK(back.loss.decision_labels() == pr.loss.decision_labels());

  CHECK_THROWS_AS(parse_scenario(R"({"schema_version": 1, "loss": [[0.5, "nan"], [0, 1]]})"),
                  ValidationError);
  CHECK_THROWS_AS(parse_scenario(R"({"schema_version": 1, "loss": [[0.5, NaN], [0, 1]]})"),
                  ValidationError);
  CHECK_THROWS_AS(
      parse_scenario(R"({"schema_version": 1, "loss": [[0.5, 0.5], [0, 1]], "true_dist": [0.45, 0.45]})"),
      ValidationError);
  CHECK_THROWS_AS(parse_scenario(R"({"schema_version": 1, "loss": [[0.5, 0.5], [0]]})"),
                  ValidationError);
  CHECK_THROWS_AS(parse_scenario("{\"schema_version\": 1,\n \"loss\": [[0.5, 0.5],\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"schema_version": 7, "loss": [[0.5, 0.5], [0, 1]]})"),
                  ParseError);
}

TEST_CASE("parse errors carry line and field") {
  try {
    parse_scenario("{\n  \"schema_version\": 1,\n  \"loss\": [[0.5, 0.5], [0, \"x\"]]\n}", "demo.json");
    FAIL("expected an error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(e.field() == "loss");
  }
}

TEST_CASE("scenario file loading") {
  const auto path = std::filesystem::temp_directory_path() / "drolab_test_scenario.json";
  {
    std::ofstream f(path);
    f << scenario_to_json(demo());
  }
  CHECK(load_scenario(path).decisions() == 2);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_scenario(path), InputError);
  CHECK(load_scenario(std::filesystem::path(DROLAB_DATA_DIR) / "two_by_two.json").true_dist);
}
