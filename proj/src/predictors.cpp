#include "drolab/predictors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

#include "drolab/error.hpp"

namespace drolab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool row_is_constant(std::span<const double> l) {
  const auto [lo, hi] = std::minmax_element(l.begin(), l.end());
  return *lo == *hi;
}

}  // namespace

// ---------------------------------------------------------------------------
// RegimeSchedule

RegimeSchedule::RegimeSchedule(Family family) : family_(std::move(family)) {
  std::visit(overloaded{
                 [](const ExponentialRate& f) {
                   if (!(f.r > 0.0) || !std::isfinite(f.r)) {
                     throw InputError("schedule: exponential rate r must be positive");
                   }
                 },
                 [](const PowerLaw& f) {
                   if (!(f.c > 0.0) || !std::isfinite(f.c)) {
                     throw InputError("schedule: power-law scale c must be positive");
                   }
                   if (!(f.beta > 0.0 && f.beta < 1.0)) {
                     throw InputError("schedule: power-law exponent must lie in (0, 1)");
                   }
                 },
                 [](const Logarithmic& f) {
                   if (!(f.c > 0.0) || !std::isfinite(f.c)) {
                     throw InputError("schedule: logarithmic scale c must be positive");
                   }
                 },
                 [](const CustomTable& f) {
                   if (f.values.empty()) throw InputError("schedule: table is empty");
                   double prev = 0.0;
                   for (const auto& [T, a] : f.values) {
                     if (T < 1) throw InputError("schedule: table sample sizes start at 1");
                     if (!(a > 0.0) || !std::isfinite(a)) {
                       throw InputError("schedule: a_T must be positive (T=" +
                                        std::to_string(T) + ")");
                     }
                     if (a < prev) {
                       throw InputError("schedule: a_T must be nondecreasing in T (T=" +
                                        std::to_string(T) + ")");
                     }
                     prev = a;
                   }
                 },
             },
             family_);
}

double RegimeSchedule::a(std::uint64_t T) const {
  if (T < 1) throw InputError("schedule: T must be at least 1");
  const double t = static_cast<double>(T);
  return std::visit(overloaded{
                        [t](const ExponentialRate& f) { return f.r * t; },
                        [t](const PowerLaw& f) { return f.c * std::pow(t, f.beta); },
                        [t](const Logarithmic& f) { return f.c * std::log1p(t); },
                        [T](const CustomTable& f) {
                          const auto it = f.values.find(T);
                          if (it == f.values.end()) {
                            throw InputError("schedule: table has no entry for T=" +
                                             std::to_string(T));
                          }
                          return it->second;
                        },
                    },
                    family_);
}

double RegimeSchedule::ratio(std::uint64_t T) const {
  if (const auto* e = std::get_if<ExponentialRate>(&family_)) {
    if (T < 1) throw InputError("schedule: T must be at least 1");
    return e->r;
  }
  return a(T) / static_cast<double>(T);
}

std::string RegimeSchedule::describe() const {
  return std::visit(overloaded{
                        [](const ExponentialRate& f) { return "exponential(r=" + short_num(f.r) + ")"; },
                        [](const PowerLaw& f) {
                          return "power_law(c=" + short_num(f.c) + ",beta=" + short_num(f.beta) + ")";
                        },
                        [](const Logarithmic& f) { return "logarithmic(c=" + short_num(f.c) + ")"; },
                        [](const CustomTable&) { return std::string("table"); },
                    },
                    family_);
}

// ---------------------------------------------------------------------------
// Kinds

std::string to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::Saa: return "saa";
    case PredictorKind::Robust: return "robust";
    case PredictorKind::KlDro: return "kl";
    case PredictorKind::Svp: return "svp";
  }
  return "unknown";
}

PredictorKind predictor_kind_from_string(const std::string& name) {
  if (name == "saa") return PredictorKind::Saa;
  if (name == "robust") return PredictorKind::Robust;
  if (name == "kl" || name == "kl_dro") return PredictorKind::KlDro;
  if (name == "svp") return PredictorKind::Svp;
  throw InputError("unknown predictor kind '" + name + "' (expected saa, robust, kl, svp)");
}

std::string PredictorSpec::label() const {
  if (kind == PredictorKind::KlDro && kl_radius) return "kl(r=" + short_num(*kl_radius) + ")";
  return to_string(kind);
}

// ---------------------------------------------------------------------------
// SAA and robust

PredictionResult predict_saa(const Problem& problem, std::size_t x,
                             const EmpiricalDistribution& emp) {
  PredictionResult out;
  out.value = cost(problem, x, emp.to_distribution());
  return out;
}

PredictionResult predict_robust(const Problem& problem, std::size_t x) {
  const auto l = problem.loss.row(x);
  const auto it = std::max_element(l.begin(), l.end());  // first maximum on ties
  PredictionResult out;
  out.value = *it;
  out.worst_case = Distribution::vertex(l.size(), static_cast<std::size_t>(it - l.begin()));
  return out;
}

// ---------------------------------------------------------------------------
// KL-DRO

namespace {

// Dual objective in the shifted variable t = alpha - gamma >= 0, restricted
// to the support of p. gaps[i] = gamma - l_i >= 0.
struct KlDual {
  std::vector<double> w;     // p(i) on the support
  std::vector<double> gaps;  // gamma - l_i on the support
  double r;

  // log(e^{-r} G(t) H(t)); f'(gamma + t) = 1 - exp(h(t)), decreasing in t.
  double h(double t) const {
    double log_g = 0.0;
    double hsum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double z = t + gaps[i];
      log_g += w[i] * std::log(z);
      hsum += w[i] / z;
    }
    return -r + log_g + std::log(hsum);
  }
  double log_geo(double t) const {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * std::log(t + gaps[i]);
    return s;
  }
  // f(gamma + t) - gamma
  double shifted_value(double t) const { return t - std::exp(-r + log_geo(t)); }

  // d/dt h(t) = H - H2 / H
  double dh(double t) const {
    double h1 = 0.0;
    double h2 = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double z = t + gaps[i];
      h1 += w[i] / z;
      h2 += w[i] / (z * z);
    }
    return h1 - h2 / h1;
  }
};

constexpr int kKlMaxIter = 4000;

}  // namespace

PredictionResult predict_kl_dual(const Problem& problem, std::size_t x, const Distribution& p,
                                 double r, double tol) {
  if (!(r >= 0.0) || !std::isfinite(r)) throw InputError("predict_kl_dual: radius r must be >= 0");
  if (!(tol > 0.0)) throw InputError("predict_kl_dual: tol must be positive");
  const auto l = problem.loss.row(x);
  if (p.size() != l.size()) throw InputError("predict_kl_dual: dimension mismatch");

  PredictionResult out;
  if (r == 0.0) {
    out.value = cost(problem, x, p);
    out.worst_case = p;
    return out;
  }
  const double gamma = *std::max_element(l.begin(), l.end());
  if (row_is_constant(l)) {
    out.value = gamma;
    out.dual_alpha = gamma;
    out.worst_case = p;
    return out;
  }

  KlDual dual{{}, {}, r};
  double mass_at_max = 0.0;
  double span = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    span = std::max(span, gamma - l[i]);
    if (p[i] <= 0.0) continue;
    dual.w.push_back(p[i]);
    dual.gaps.push_back(gamma - l[i]);
    if (l[i] == gamma) mass_at_max += p[i];
  }

  // Locate t* = argmin; t* = 0 is possible only when every maximizing
  // scenario has zero weight (then f'(gamma) is finite).
  double t_star = 0.0;
  const bool support_constant =
      std::all_of(dual.gaps.begin(), dual.gaps.end(), [&](double g) { return g == dual.gaps[0]; });
  bool at_boundary = support_constant;  // f' = 1 - e^{-r} > 0 everywhere
  if (!support_constant && mass_at_max == 0.0 && dual.h(0.0) <= 0.0) at_boundary = true;

  if (!at_boundary) {
    double hi = span;
    int guard = 0;
    while (dual.h(hi) > 0.0) {
      hi *= 2.0;
      if (++guard > 2000) throw ConvergenceError("predict_kl_dual: no upper bracket", 0.0, hi);
    }
    double lo = 0.0;
    if (mass_at_max > 0.0) {
      // h -> +inf at 0+, possibly very slowly when most mass sits at the max.
      lo = 1e-12 * span;
      while (dual.h(lo) <= 0.0 && lo > std::numeric_limits<double>::min() * 1e12) lo *= 1e-12;
      if (dual.h(lo) <= 0.0) {
        // Root below the smallest representable shift: alpha* == gamma to
        // working precision.
        lo = std::numeric_limits<double>::denorm_min();
        hi = lo;
      }
    }

    int it = 0;
    while (true) {
      const double width = hi - lo;
      const bool abs_ok = width <= 1e-12 * (1.0 + std::abs(gamma + hi));
      const bool rel_ok = lo == 0.0 ? width <= 1e-300 : width <= 1e-12 * lo;
      if (abs_ok && (rel_ok || std::abs(dual.shifted_value(lo) - dual.shifted_value(hi)) <= tol * 1e-3)) {
        break;
      }
      if (++it > kKlMaxIter) {
        throw ConvergenceError("predict_kl_dual: bisection did not converge", gamma + lo,
                               gamma + hi);
      }
      const double mid = (lo > 0.0 && hi > 4.0 * lo) ? std::sqrt(lo) * std::sqrt(hi) : 0.5 * (lo + hi);
      if (dual.h(mid) > 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    t_star = 0.5 * (lo + hi);
    // Newton polish on f'(gamma + t) = 1 - exp(h(t)), kept inside the bracket.
    for (int k = 0; k < 2 && t_star > 0.0; ++k) {
      const double eh = std::exp(dual.h(t_star));
      const double fpp = -eh * dual.dh(t_star);
      if (!(fpp > 0.0)) break;
      const double next = t_star - (1.0 - eh) / fpp;
      if (!(next >= lo && next <= hi)) break;
      t_star = next;
    }
  }

  out.value = gamma + dual.shifted_value(t_star);
  out.dual_alpha = gamma + t_star;

  // Primal maximizer: q_i = e^{-r} G p_i / (alpha - l_i) on the support, the
  // remaining mass f'(alpha) on the first maximizing scenario (which has
  // zero weight whenever that remainder is positive).
  const double scale = std::exp(-r + dual.log_geo(t_star));
  std::vector<double> q(l.size(), 0.0);
  double assigned = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (p[i] <= 0.0) continue;
    const double z = t_star + (gamma - l[i]);
    q[i] = z > 0.0 ? scale * p[i] / z : 0.0;
    assigned += q[i];
  }
  const double rest = 1.0 - assigned;
  if (rest > 0.0) {
    std::size_t target = l.size();
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (l[i] == gamma && (p[i] == 0.0 || target == l.size())) {
        target = i;
        if (p[i] == 0.0) break;
      }
    }
    q[target] += rest;
  }
  try {
    out.worst_case = Distribution(std::move(q));
  } catch (const ValidationError&) {
    // Leave worst_case empty if rounding left an unusable point.
  }
  return out;
}

double predict_kl_primal_grid(const Problem& problem, std::size_t x, const Distribution& p,
                              double r, double grid_step) {
  if (!(grid_step > 0.0) || grid_step > 1.0) {
    throw InputError("predict_kl_primal_grid: grid_step must lie in (0, 1]");
  }
  if (!(r >= 0.0)) throw InputError("predict_kl_primal_grid: radius r must be >= 0");
  const auto l = problem.loss.row(x);
  const std::size_t d = l.size();
  if (d > 3) throw InputError("predict_kl_primal_grid: only d <= 3 is supported");
  if (p.size() != d) throw InputError("predict_kl_primal_grid: dimension mismatch");

  const auto N = static_cast<std::uint64_t>(std::ceil(1.0 / grid_step - 1e-9));
  const double Nd = static_cast<double>(N);

  // Plain-double KL so that the oracle does not route through Distribution.
  auto kl = [&](const double* q) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      if (p[i] == 0.0) continue;
      if (q[i] <= 0.0) return kInf;
      s += p[i] * std::log(p[i] / q[i]);
    }
    return s;
  };
  auto value = [&](const double* q) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += l[i] * q[i];
    return s;
  };

  double best = cost(problem, x, p);
  if (d == 2) {
    for (std::uint64_t i = 0; i <= N; ++i) {
      const double q[2] = {static_cast<double>(i) / Nd, static_cast<double>(N - i) / Nd};
      if (kl(q) <= r) best = std::max(best, value(q));
    }
    return best;
  }

  // d == 3: along each row q1 = i/N the divergence is convex in j and the
  // cost is affine, so the best feasible grid point of the row is one of the
  // two ends of its (contiguous) feasible range.
  for (std::uint64_t i = 0; i <= N; ++i) {
    const std::uint64_t M = N - i;
    auto point = [&](std::uint64_t j, double* q) {
      q[0] = static_cast<double>(i) / Nd;
      q[1] = static_cast<double>(j) / Nd;
      q[2] = static_cast<double>(M - j) / Nd;
    };
    auto kl_at = [&](std::uint64_t j) {
      double q[3];
      point(j, q);
      return kl(q);
    };
    std::uint64_t jmin = 0;
    if (M > 0) {
      // smallest j with kl(j+1) - kl(j) >= 0
      std::uint64_t a = 0;
      std::uint64_t b = M;
      while (a < b) {
        const std::uint64_t m = a + (b - a) / 2;
        const double f0 = kl_at(m);
        const double f1 = kl_at(m + 1);
        const bool rising = (f0 == kInf) ? false : (f1 == kInf ? true : f1 - f0 >= 0.0);
        if (rising) {
          b = m;
        } else {
          a = m + 1;
        }
      }
      jmin = a;
    }
    if (!(kl_at(jmin) <= r)) continue;
    // leftmost feasible j in [0, jmin]
    std::uint64_t a = 0;
    std::uint64_t b = jmin;
    while (a < b) {
      const std::uint64_t m = a + (b - a) / 2;
      if (kl_at(m) <= r) {
        b = m;
      } else {
        a = m + 1;
      }
    }
    const std::uint64_t jl = a;
    // rightmost feasible j in [jmin, M]
    a = jmin;
    b = M;
    while (a < b) {
      const std::uint64_t m = a + (b - a + 1) / 2;
      if (kl_at(m) <= r) {
        a = m;
      } else {
        b = m - 1;
      }
    }
    const std::uint64_t jr = a;
    double q[3];
    point(jl, q);
    best = std::max(best, value(q));
    point(jr, q);
    best = std::max(best, value(q));
  }
  return best;
}

// ---------------------------------------------------------------------------
// SVP

double svp_value(const Problem& problem, std::size_t x, const Distribution& p, double ratio) {
  if (!(ratio >= 0.0)) throw InputError("svp: ratio a_T/T must be >= 0");
  return cost(problem, x, p) + std::sqrt(2.0 * ratio * variance(problem, x, p));
}

SimplexDelta svp_direction(const Problem& problem, std::size_t x, const Distribution& p) {
  if (!p.is_interior()) {
    throw DomainError("svp_direction: distribution must be interior (all weights > 0)");
  }
  const auto l = problem.loss.row(x);
  const std::size_t d = l.size();
  if (p.size() != d) throw InputError("svp_direction: dimension mismatch");
  std::vector<double> phi(d);
  const double var = variance(problem, x, p);
  if (row_is_constant(l) || var == 0.0) {
    // Any boundary direction works; take e_1 - p normalized to
    // ||sqrt(2) phi||_p = 1.
    double norm2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      phi[i] = (i == 0 ? 1.0 : 0.0) - p[i];
      norm2 += phi[i] * phi[i] / p[i];
    }
    const double s = 1.0 / std::sqrt(norm2);
    for (double& v : phi) v *= s;
  } else {
    const double c = cost(problem, x, p);
    const double sd = std::sqrt(var);
    for (std::size_t i = 0; i < d; ++i) phi[i] = p[i] * (l[i] - c) / sd;
  }
  return SimplexDelta(std::move(phi));
}

Distribution svp_worst_case(const Problem& problem, std::size_t x, const Distribution& p,
                            double ratio) {
  if (!(ratio >= 0.0)) throw InputError("svp_worst_case: ratio a_T/T must be >= 0");
  const SimplexDelta phi = svp_direction(problem, x, p);
  const double step = std::sqrt(2.0 * ratio);
  std::vector<double> q(p.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    q[i] = p[i] + step * phi[i];
    if (q[i] < -1e-15) {
      throw DomainError("svp_worst_case: ratio " + std::to_string(ratio) +
                        " moves the worst case outside the simplex");
    }
  }
  return Distribution(std::move(q));
}

bool dro_condition_holds(const Distribution& p, double ratio) {
  if (!(ratio >= 0.0)) return false;
  double inner = 1.0;
  for (double w : p.weights()) inner = std::min(inner, std::min(w, 1.0 - w));
  return std::sqrt(2.0 * ratio) <= p.min_weight() * inner;
}

PredictionResult predict_svp(const Problem& problem, std::size_t x,
                             const EmpiricalDistribution& emp, const RegimeSchedule& schedule) {
  const double ratio = schedule.ratio(emp.sample_size());
  const Distribution p = emp.to_distribution();
  PredictionResult out;
  out.value = svp_value(problem, x, p, ratio);
  out.condition_ok = dro_condition_holds(p, ratio);
  if (p.is_interior() && variance(problem, x, p) > 0.0) {
    const SimplexDelta phi = svp_direction(problem, x, p);
    const double step = std::sqrt(2.0 * ratio);
    std::vector<double> q(p.size());
    bool inside = true;
    for (std::size_t i = 0; i < q.size(); ++i) {
      q[i] = p[i] + step * phi[i];
      inside = inside && q[i] >= 0.0;
    }
    if (inside) out.worst_case = Distribution(std::move(q));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ellipsoid-simplex linear maximization

EllipsoidMaxResult ellipsoid_linear_max(std::span<const double> loss_row, const Distribution& p,
                                        const Eigen::MatrixXd& a_matrix, double radius) {
  const auto d = static_cast<Eigen::Index>(p.size());
  if (static_cast<Eigen::Index>(loss_row.size()) != d || a_matrix.rows() != d ||
      a_matrix.cols() != d) {
    throw InputError("ellipsoid_linear_max: dimension mismatch");
  }
  if (!(radius >= 0.0)) throw InputError("ellipsoid_linear_max: radius must be >= 0");

  Eigen::LLT<Eigen::MatrixXd> llt(a_matrix);
  if (llt.info() != Eigen::Success) {
    throw DomainError("ellipsoid_linear_max: matrix is singular or not positive definite");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a_matrix, Eigen::EigenvaluesOnly);
  const double lambda_min = eig.eigenvalues().minCoeff();
  if (!(lambda_min > 0.0)) {
    throw DomainError("ellipsoid_linear_max: matrix is singular or not positive definite");
  }
  const double sigma = std::sqrt(lambda_min);
  double inner = 1.0;
  for (double w : p.weights()) inner = std::min(inner, std::min(w, 1.0 - w));
  const double lhs = std::sqrt(radius);
  const double rhs = sigma * inner;
  if (lhs > rhs) {
    throw DomainError("ellipsoid_linear_max: containment condition violated: sqrt(radius) = " +
                      std::to_string(lhs) + " > sigma(A) * min min(p, 1-p) = " +
                      std::to_string(rhs));
  }

  double base = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) base += loss_row[i] * p[i];
  if (row_is_constant(loss_row)) return {base, p};

  const Eigen::Map<const Eigen::VectorXd> l(loss_row.data(), d);
  const Eigen::VectorXd e = Eigen::VectorXd::Ones(d);
  const Eigen::VectorXd ainv_l = llt.solve(l);
  const Eigen::VectorXd ainv_e = llt.solve(e);
  const double el = e.dot(ainv_l);
  const double ee = e.dot(ainv_e);
  const double gamma = l.dot(ainv_l) - el * el / ee;
  if (!(gamma > 0.0)) return {base, p};

  const Eigen::VectorXd dir = ainv_l - (el / ee) * ainv_e;
  const double step = std::sqrt(radius / gamma);
  std::vector<double> q(p.size());
  for (Eigen::Index i = 0; i < d; ++i) q[i] = p[i] + step * dir[i];
  return {base + std::sqrt(radius * gamma), Distribution(std::move(q))};
}

// ---------------------------------------------------------------------------
// Dispatch

namespace {

double kl_radius(const PredictorSpec& spec, std::uint64_t T, const RegimeSchedule& schedule) {
  return spec.kl_radius ? *spec.kl_radius : schedule.ratio(T);
}

}  // namespace

PredictionResult predict(const Problem& problem, const PredictorSpec& spec, std::size_t x,
                         const EmpiricalDistribution& emp, const RegimeSchedule& schedule) {
  switch (spec.kind) {
    case PredictorKind::Saa: return predict_saa(problem, x, emp);
    case PredictorKind::Robust: return predict_robust(problem, x);
    case PredictorKind::KlDro:
      return predict_kl_dual(problem, x, emp.to_distribution(),
                             kl_radius(spec, emp.sample_size(), schedule));
    case PredictorKind::Svp: return predict_svp(problem, x, emp, schedule);
  }
  throw InputError("unknown predictor kind");
}

double predict_value(const Problem& problem, const PredictorSpec& spec, std::size_t x,
                     const Distribution& p, std::uint64_t T, const RegimeSchedule& schedule) {
  switch (spec.kind) {
    case PredictorKind::Saa: return cost(problem, x, p);
    case PredictorKind::Robust: {
      const auto l = problem.loss.row(x);
      return *std::max_element(l.begin(), l.end());
    }
    case PredictorKind::KlDro:
      return predict_kl_dual(problem, x, p, kl_radius(spec, T, schedule)).value;
    case PredictorKind::Svp: return svp_value(problem, x, p, schedule.ratio(T));
  }
  throw InputError("unknown predictor kind");
}

}  // namespace drolab
