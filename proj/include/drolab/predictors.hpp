#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "drolab/decision_problem.hpp"
#include "drolab/simplex.hpp"

namespace drolab {

// ---------------------------------------------------------------------------
// Guarantee speed a_T

struct ExponentialRate {
  double r;  // a_T = r T
};
struct PowerLaw {
  double c;
  double beta;  // a_T = c T^beta, 0 < beta < 1
};
struct Logarithmic {
  double c;  // a_T = c log(1 + T)
};
struct CustomTable {
  std::map<std::uint64_t, double> values;  // explicit a_T per sample size
};

/// The sequence (a_T) fixing the demanded decay speed e^{-a_T} of the
/// disappointment probability.
class RegimeSchedule {
 public:
  using Family = std::variant<ExponentialRate, PowerLaw, Logarithmic, CustomTable>;

  explicit RegimeSchedule(Family family);

  static RegimeSchedule exponential(double r) { return RegimeSchedule(ExponentialRate{r}); }
  static RegimeSchedule power_law(double c, double beta) {
    return RegimeSchedule(PowerLaw{c, beta});
  }
  static RegimeSchedule logarithmic(double c) { return RegimeSchedule(Logarithmic{c}); }
  static RegimeSchedule table(std::map<std::uint64_t, double> values) {
    return RegimeSchedule(CustomTable{std::move(values)});
  }

  double a(std::uint64_t T) const;
  /// a_T / T. Exact r for the exponential family.
  double ratio(std::uint64_t T) const;

  const Family& family() const { return family_; }
  std::string describe() const;

 private:
  Family family_;
};

// ---------------------------------------------------------------------------
// Predictors

struct PredictionResult {
  double value = 0.0;
  std::optional<Distribution> worst_case;
  std::optional<double> dual_alpha;
  std::optional<bool> condition_ok;
};

enum class PredictorKind { Saa, Robust, KlDro, Svp };

std::string to_string(PredictorKind kind);
PredictorKind predictor_kind_from_string(const std::string& name);

/// A predictor and its parameters. The KL radius defaults to the schedule
/// ratio a_T / T when not fixed explicitly.
struct PredictorSpec {
  PredictorKind kind = PredictorKind::Saa;
  std::optional<double> kl_radius;

  std::string label() const;
};

PredictionResult predict_saa(const Problem& problem, std::size_t x,
                             const EmpiricalDistribution& emp);

PredictionResult predict_robust(const Problem& problem, std::size_t x);

inline constexpr double kKlDefaultTol = 1e-10;

/// Worst-case expected loss over {q : I(p, q) <= r}, computed through the
/// one-dimensional convex dual
///   min_{alpha >= max_i l_i} alpha - e^{-r} exp(sum_i p(i) log(alpha - l_i)).
/// Scenarios with p(i) = 0 drop out of the geometric mean but still count
/// for the max loss.
PredictionResult predict_kl_dual(const Problem& problem, std::size_t x, const Distribution& p,
                                 double r, double tol = kKlDefaultTol);

/// Brute-force lower bound on the same supremum: the best cost over simplex
/// grid points (spacing 1/ceil(1/grid_step)) inside the KL ball, plus p
/// itself. d <= 3 only.
double predict_kl_primal_grid(const Problem& problem, std::size_t x, const Distribution& p,
                              double r, double grid_step);

/// Empirical cost plus sqrt(2 a_T / T * empirical variance).
PredictionResult predict_svp(const Problem& problem, std::size_t x,
                             const EmpiricalDistribution& emp, const RegimeSchedule& schedule);

/// SVP value at an arbitrary distribution with radius ratio a_T / T.
double svp_value(const Problem& problem, std::size_t x, const Distribution& p, double ratio);

/// Unit direction phi_x(p) = (l (.) p - c p) / sqrt(Var); when Var = 0 the
/// normalized direction e_1 - p. Satisfies ||sqrt(2) phi||_p = 1.
SimplexDelta svp_direction(const Problem& problem, std::size_t x, const Distribution& p);

/// p + sqrt(2 ratio) phi_x(p): the point of the ellipsoid ball
/// {q : ||q - p||_p^2 <= ratio} that maximizes the cost.
Distribution svp_worst_case(const Problem& problem, std::size_t x, const Distribution& p,
                            double ratio);

/// sqrt(2 ratio) <= min_i p(i) * min_i min(p(i), 1 - p(i)): the ellipsoid
/// ball lies inside the simplex, so SVP equals its DRO form.
bool dro_condition_holds(const Distribution& p, double ratio);

struct EllipsoidMaxResult {
  double value = 0.0;
  Distribution argmax;
};

/// max { loss_row . q : q in simplex, (q - p)^T A (q - p) <= radius } in
/// closed form, valid when the ellipsoid slice lies in the simplex.
EllipsoidMaxResult ellipsoid_linear_max(std::span<const double> loss_row, const Distribution& p,
                                        const Eigen::MatrixXd& a_matrix, double radius);

/// Evaluates `spec` at decision x; SVP and KL radii come from `schedule`
/// at T = emp.sample_size().
PredictionResult predict(const Problem& problem, const PredictorSpec& spec, std::size_t x,
                         const EmpiricalDistribution& emp, const RegimeSchedule& schedule);

/// Value only, at a distribution p standing for an empirical distribution of
/// T samples. Cheaper than predict(): no worst-case construction.
double predict_value(const Problem& problem, const PredictorSpec& spec, std::size_t x,
                     const Distribution& p, std::uint64_t T, const RegimeSchedule& schedule);

}  // namespace drolab
