#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drolab/simplex.hpp"

namespace drolab {

/// Loss l(x, i) for n decisions (rows) and d scenarios (columns).
class LossMatrix {
 public:
  LossMatrix(std::size_t n_decisions, std::size_t n_scenarios, std::vector<double> row_major,
             std::vector<std::string> decision_labels = {},
             std::vector<std::string> scenario_labels = {});

  static LossMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t decisions() const { return n_; }
  std::size_t scenarios() const { return d_; }

  double operator()(std::size_t x, std::size_t i) const { return values_[x * d_ + i]; }
  std::span<const double> row(std::size_t x) const;

  /// max over all entries of |l(x, i)|.
  double sup_norm() const { return sup_norm_; }

  const std::vector<std::string>& decision_labels() const { return decision_labels_; }
  const std::vector<std::string>& scenario_labels() const { return scenario_labels_; }

 private:
  std::size_t n_;
  std::size_t d_;
  std::vector<double> values_;
  std::vector<std::string> decision_labels_;
  std::vector<std::string> scenario_labels_;
  double sup_norm_ = 0.0;
};

/// Loss matrix plus, in experiment mode, the data-generating distribution.
struct Problem {
  LossMatrix loss;
  std::optional<Distribution> true_dist;

  explicit Problem(LossMatrix l, std::optional<Distribution> p = std::nullopt);

  std::size_t decisions() const { return loss.decisions(); }
  std::size_t scenarios() const { return loss.scenarios(); }
  const Distribution& require_true_dist() const;
};

/// Expected loss sum_i l(x, i) p(i).
double cost(const Problem& problem, std::size_t x, const Distribution& p);
/// Same functional applied to a signed measure (a tangent direction).
double cost(const Problem& problem, std::size_t x, const SimplexDelta& delta);

double variance(const Problem& problem, std::size_t x, const Distribution& p);
double covariance(const Problem& problem, std::size_t x1, std::size_t x2, const Distribution& p);

/// Among decisions whose cost is within `tol` of the minimum cost, the one
/// with the smallest variance; ties go to the lowest index.
std::size_t min_variance_minimizer(const Problem& problem, const Distribution& p, double tol);
/// Uses tol = 1e-9 * (1 + |c*|).
std::size_t min_variance_minimizer(const Problem& problem, const Distribution& p);

inline constexpr int kScenarioSchemaVersion = 1;

Problem parse_scenario(std::string_view json_text, const std::string& source = "<scenario>");
Problem load_scenario(const std::filesystem::path& path);
std::string scenario_to_json(const Problem& problem);

}  // namespace drolab
