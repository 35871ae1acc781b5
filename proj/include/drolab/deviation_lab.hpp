#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "drolab/decision_problem.hpp"
#include "drolab/predictors.hpp"
#include "drolab/prescriptors.hpp"
#include "drolab/simplex.hpp"

namespace drolab {

/// Disappointment of the prediction for one fixed decision:
/// c(x, P) > c_hat(x, P_T, T).
struct PredictionMode {
  std::size_t decision = 0;
};
/// Disappointment of the prescription: c(x_T, P) > c_hat*(P_T, T), with
/// x_T the prescribed decision.
struct PrescriptionMode {};
using Mode = std::variant<PredictionMode, PrescriptionMode>;

std::string describe(const Mode& mode);

struct ExactMethod {};
struct MonteCarloMethod {
  std::uint64_t n_samples = 0;
  double std_err = 0.0;
};
struct ImportanceMethod {
  std::uint64_t n_samples = 0;
  Distribution shift;
  double std_err = 0.0;
  double effective_sample_size = 0.0;
};
using EstimationMethod = std::variant<ExactMethod, MonteCarloMethod, ImportanceMethod>;

struct DisappointmentReport {
  double probability = 0.0;
  double log_probability = 0.0;  // -inf when probability is 0
  double rate = 0.0;             // log(probability) / a_T, -inf when probability is 0
  EstimationMethod method;
  std::uint64_t T = 0;
  double a_T = 0.0;
  Mode mode;
  PredictorSpec predictor;

  std::string method_name() const;
  /// Standard error; empty for exact reports.
  std::optional<double> std_err() const;
};

/// Everything that defines a disappointment probability except T.
struct Experiment {
  const Problem& problem;
  PredictorSpec predictor;
  Mode mode;
  Distribution truth;
  RegimeSchedule schedule;
};

/// Strict disappointment with a 1e-12 guard band: ties do not disappoint.
bool disappoints(const Experiment& exp, const EmpiricalDistribution& emp);

/// log P(pred(P_T)) under T i.i.d. draws from p, summed over the lattice.
double exact_event_log_probability(const Distribution& p, std::uint64_t T,
                                   const std::function<bool(const EmpiricalDistribution&)>& pred,
                                   double cap = kDefaultLatticeCap);

DisappointmentReport disappointment_exact(const Experiment& exp, std::uint64_t T,
                                          double cap = kDefaultLatticeCap);

DisappointmentReport disappointment_mc(const Experiment& exp, std::uint64_t T,
                                       std::uint64_t n_samples, std::uint64_t seed);

/// Draws P_T from shift_q^T and reweights each sample by the likelihood
/// ratio prod_i (p(i)/q(i))^{counts_i}.
DisappointmentReport disappointment_importance(const Experiment& exp, std::uint64_t T,
                                               const Distribution& shift_q,
                                               std::uint64_t n_samples, std::uint64_t seed);

/// Shift toward the region where the predictor under-estimates:
/// p - sqrt(2 ratio) phi_x(p), pulled back toward p until every weight is at
/// least 5% of p(i). Returns p for predictors without a radius.
Distribution default_importance_shift(const Experiment& exp, std::uint64_t T);

struct RateCurveOptions {
  double cap = kDefaultLatticeCap;
  std::uint64_t n_samples = 100000;  // importance sampling fallback
  std::uint64_t seed = 0;
};

struct RatePoint {
  std::uint64_t T = 0;
  double a_T = 0.0;
  double rate = 0.0;
  DisappointmentReport report;
};

/// rate(T) = log(p_T) / a_T for each T (ascending). Exact where the lattice
/// fits under the cap, importance sampling otherwise.
std::vector<RatePoint> rate_curve(const Experiment& exp, std::vector<std::uint64_t> T_list,
                                  const RateCurveOptions& options = {});

/// Cramér rate of the lower tail of the sample mean of l(x, xi):
///   sup_{lambda} [lambda m - log sum_i p(i) exp(lambda l(x, i))]
/// for m below the mean (0 at or above it, +inf below the support).
/// `level` defaults to the mean c(x, p).
ExtendedReal theoretical_rate_saa(const Problem& problem, std::size_t x, const Distribution& p,
                                  std::optional<double> level = std::nullopt);

}  // namespace drolab
