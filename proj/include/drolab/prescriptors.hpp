#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "drolab/decision_problem.hpp"
#include "drolab/predictors.hpp"

namespace drolab {

struct PrescriptionResult {
  std::size_t decision = 0;
  double value = 0.0;  // predictor value at `decision`: the certified cost
  std::optional<double> gap_lower;
  std::optional<double> gap_upper;
  PredictorSpec predictor;
};

/// Minimizes the predictor over the decision set. Ties (values within
/// 1e-12 of the minimum) go to the smaller empirical variance, then to the
/// lower index.
PrescriptionResult prescribe(const Problem& problem, const PredictorSpec& spec,
                             const EmpiricalDistribution& emp, const RegimeSchedule& schedule);

/// Same, with the empirical distribution given as weights p for T samples.
PrescriptionResult prescribe_at(const Problem& problem, const PredictorSpec& spec,
                                const Distribution& p, std::uint64_t T,
                                const RegimeSchedule& schedule);

/// Regularization sandwich of the SVP optimum:
///   sqrt(alpha Var(x_svp)) <= c*_svp - c* <= sqrt(alpha Var(x*)),  alpha = 2 a_T / T,
/// with x* the minimal-variance minimizer of the true cost.
struct GapBound {
  double lower = 0.0;
  double upper = 0.0;
  double gap = 0.0;  // c*_svp - c*
  std::size_t svp_decision = 0;
  std::size_t min_variance_decision = 0;
  bool holds = false;  // lower <= gap <= upper within 1e-12
};

GapBound prescription_gap_bound(const Problem& problem, const Distribution& p, std::uint64_t T,
                                const RegimeSchedule& schedule);

struct ConvexityReport {
  bool threshold_ok = false;
  std::size_t midpoint_violations = 0;
  std::size_t triples_checked = 0;
};

/// Samples midpoint convexity of x -> c(x, p) + sqrt(2 ratio Var_p(l(x, .)))
/// over a uniformly spaced decision grid (rows of `grid`). Checks every
/// triple (i, (i+k)/2, k) with k - i even; a violation is
/// f(mid) > (f(i) + f(k))/2 + 1e-9. `threshold_ok` is the sufficient
/// condition for convexity (same inequality as dro_condition_holds).
ConvexityReport convexity_certificate(const LossMatrix& grid, const Distribution& emp,
                                      double ratio);
ConvexityReport convexity_certificate(const LossMatrix& grid, const EmpiricalDistribution& emp,
                                      const RegimeSchedule& schedule);

}  // namespace drolab
