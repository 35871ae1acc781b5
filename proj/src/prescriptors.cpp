#include "drolab/prescriptors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "drolab/error.hpp"

namespace drolab {

namespace {
constexpr double kValueTie = 1e-12;
}

PrescriptionResult prescribe_at(const Problem& problem, const PredictorSpec& spec,
                                const Distribution& p, std::uint64_t T,
                                const RegimeSchedule& schedule) {
  const std::size_t n = problem.decisions();
  std::vector<double> values(n);
  for (std::size_t x = 0; x < n; ++x) values[x] = predict_value(problem, spec, x, p, T, schedule);
  const double best = *std::min_element(values.begin(), values.end());

  std::size_t arg = n;
  double arg_var = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    if (values[x] > best + kValueTie) continue;
    const double v = variance(problem, x, p);
    if (arg == n || v < arg_var) {
      arg = x;
      arg_var = v;
    }
  }
  PrescriptionResult out;
  out.decision = arg;
  out.value = values[arg];
  out.predictor = spec;
  return out;
}

PrescriptionResult prescribe(const Problem& problem, const PredictorSpec& spec,
                             const EmpiricalDistribution& emp, const RegimeSchedule& schedule) {
  return prescribe_at(problem, spec, emp.to_distribution(), emp.sample_size(), schedule);
}

GapBound prescription_gap_bound(const Problem& problem, const Distribution& p, std::uint64_t T,
                                const RegimeSchedule& schedule) {
  if (!p.is_interior()) throw DomainError("prescription_gap_bound: p must be interior");
  const double alpha = 2.0 * schedule.ratio(T);

  double c_star = cost(problem, 0, p);
  for (std::size_t x = 1; x < problem.decisions(); ++x) c_star = std::min(c_star, cost(problem, x, p));

  GapBound out;
  out.min_variance_decision = min_variance_minimizer(problem, p);
  const auto svp = prescribe_at(problem, PredictorSpec{PredictorKind::Svp, {}}, p, T, schedule);
  out.svp_decision = svp.decision;
  out.upper = std::sqrt(alpha * variance(problem, out.min_variance_decision, p));
  out.lower = std::sqrt(alpha * variance(problem, out.svp_decision, p));
  out.gap = svp.value - c_star;
  out.holds = out.lower <= out.gap + 1e-12 && out.gap <= out.upper + 1e-12;
  return out;
}

ConvexityReport convexity_certificate(const LossMatrix& grid, const Distribution& emp,
                                      double ratio) {
  if (grid.decisions() < 3) throw InputError("convexity_certificate: grid needs at least 3 decisions");
  if (emp.size() != grid.scenarios()) throw InputError("convexity_certificate: dimension mismatch");
  if (!(ratio >= 0.0)) throw InputError("convexity_certificate: ratio must be >= 0");

  const Problem problem(grid);
  const std::size_t n = grid.decisions();
  std::vector<double> f(n);
  for (std::size_t x = 0; x < n; ++x) f[x] = svp_value(problem, x, emp, ratio);

  ConvexityReport out;
  out.threshold_ok = dro_condition_holds(emp, ratio);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i + 2; k < n; k += 2) {
      const std::size_t mid = (i + k) / 2;
      ++out.triples_checked;
      if (f[mid] > 0.5 * (f[i] + f[k]) + 1e-9) ++out.midpoint_violations;
    }
  }
  return out;
}

ConvexityReport convexity_certificate(const LossMatrix& grid, const EmpiricalDistribution& emp,
                                      const RegimeSchedule& schedule) {
  return convexity_certificate(grid, emp.to_distribution(), schedule.ratio(emp.sample_size()));
}

}  // namespace drolab
