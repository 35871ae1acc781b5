#include "drolab/deviation_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "drolab/error.hpp"
#include "drolab/parallel.hpp"

namespace drolab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kGuard = 1e-12;
constexpr std::uint64_t kLatticeBlock = 4096;
constexpr std::uint64_t kSampleBlock = 16384;

struct CountsHash {
  std::size_t operator()(const std::vector<std::uint64_t>& c) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto v : c) {
      h ^= v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

// Event evaluation memoized on counts; one per block, so results never
// depend on scheduling.
class MemoizedEvent {
 public:
  explicit MemoizedEvent(const Experiment& exp) : exp_(exp) {}
  bool operator()(const EmpiricalDistribution& emp) {
    std::vector<std::uint64_t> key(emp.counts().begin(), emp.counts().end());
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    const bool v = disappoints(exp_, emp);
    cache_.emplace(std::move(key), v);
    return v;
  }

 private:
  const Experiment& exp_;
  std::unordered_map<std::vector<std::uint64_t>, bool, CountsHash> cache_;
};

DisappointmentReport base_report(const Experiment& exp, std::uint64_t T, double log_p,
                                 EstimationMethod method) {
  DisappointmentReport r;
  r.T = T;
  r.a_T = exp.schedule.a(T);
  r.log_probability = log_p;
  r.probability = log_p == kNegInf ? 0.0 : std::min(1.0, std::exp(log_p));
  r.rate = log_p == kNegInf ? kNegInf : log_p / r.a_T;
  r.method = std::move(method);
  r.mode = exp.mode;
  r.predictor = exp.predictor;
  return r;
}

void check_experiment(const Experiment& exp) {
  if (exp.truth.size() != exp.problem.scenarios()) {
    throw InputError("experiment: true distribution dimension does not match the scenarios");
  }
  if (const auto* pm = std::get_if<PredictionMode>(&exp.mode)) {
    if (pm->decision >= exp.problem.decisions()) {
      throw InputError("experiment: decision index " + std::to_string(pm->decision) +
                       " out of range");
    }
  }
}

}  // namespace

std::string describe(const Mode& mode) {
  if (const auto* pm = std::get_if<PredictionMode>(&mode)) {
    return "prediction(" + std::to_string(pm->decision) + ")";
  }
  return "prescription";
}

std::string DisappointmentReport::method_name() const {
  switch (method.index()) {
    case 0: return "exact";
    case 1: return "mc";
    default: return "importance";
  }
}

std::optional<double> DisappointmentReport::std_err() const {
  if (const auto* mc = std::get_if<MonteCarloMethod>(&method)) return mc->std_err;
  if (const auto* is = std::get_if<ImportanceMethod>(&method)) return is->std_err;
  return std::nullopt;
}

bool disappoints(const Experiment& exp, const EmpiricalDistribution& emp) {
  const Distribution phat = emp.to_distribution();
  const std::uint64_t T = emp.sample_size();
  if (const auto* pm = std::get_if<PredictionMode>(&exp.mode)) {
    const double truth = cost(exp.problem, pm->decision, exp.truth);
    const double predicted =
        predict_value(exp.problem, exp.predictor, pm->decision, phat, T, exp.schedule);
    return truth > predicted + kGuard;
  }
  const auto presc = prescribe_at(exp.problem, exp.predictor, phat, T, exp.schedule);
  return cost(exp.problem, presc.decision, exp.truth) > presc.value + kGuard;
}

double exact_event_log_probability(const Distribution& p, std::uint64_t T,
                                   const std::function<bool(const EmpiricalDistribution&)>& pred,
                                   double cap) {
  const Lattice lattice(T, p.size(), cap);
  const std::uint64_t n_blocks = (lattice.size() + kLatticeBlock - 1) / kLatticeBlock;
  std::vector<LogSumAccumulator> partial(n_blocks);
  run_blocks(n_blocks, [&](std::size_t b) {
    const std::uint64_t begin = b * kLatticeBlock;
    lattice.for_each(begin, begin + kLatticeBlock, [&](const EmpiricalDistribution& e) {
      if (pred(e)) partial[b].add(multinomial_log_prob(e, p));
    });
  });
  LogSumAccumulator total;
  for (const auto& acc : partial) total.merge(acc);
  return std::min(0.0, total.log_sum());
}

DisappointmentReport disappointment_exact(const Experiment& exp, std::uint64_t T, double cap) {
  check_experiment(exp);
  // Each lattice point is visited once, so no memoization is needed here.
  const double log_p = exact_event_log_probability(
      exp.truth, T, [&](const EmpiricalDistribution& e) { return disappoints(exp, e); }, cap);
  return base_report(exp, T, log_p, ExactMethod{});
}

DisappointmentReport disappointment_mc(const Experiment& exp, std::uint64_t T,
                                       std::uint64_t n_samples, std::uint64_t seed) {
  check_experiment(exp);
  if (n_samples < 1) throw InputError("disappointment_mc: n_samples must be at least 1");
  if (T < 1) throw InputError("disappointment_mc: T must be at least 1");
  const std::uint64_t n_blocks = (n_samples + kSampleBlock - 1) / kSampleBlock;
  std::vector<std::uint64_t> hits(n_blocks, 0);
  run_blocks(n_blocks, [&](std::size_t b) {
    CounterRng rng(seed, b);
    MemoizedEvent event(exp);
    const std::uint64_t count = std::min(kSampleBlock, n_samples - b * kSampleBlock);
    for (std::uint64_t s = 0; s < count; ++s) {
      if (event(sample_counts(exp.truth, T, rng))) ++hits[b];
    }
  });
  std::uint64_t total = 0;
  for (auto h : hits) total += h;
  const double n = static_cast<double>(n_samples);
  const double phat = static_cast<double>(total) / n;
  const double se = std::sqrt(std::max(0.0, phat - phat * phat) / n);
  return base_report(exp, T, total == 0 ? kNegInf : std::log(phat), MonteCarloMethod{n_samples, se});
}

DisappointmentReport disappointment_importance(const Experiment& exp, std::uint64_t T,
                                               const Distribution& shift_q,
                                               std::uint64_t n_samples, std::uint64_t seed) {
  check_experiment(exp);
  if (n_samples < 1) throw InputError("disappointment_importance: n_samples must be at least 1");
  if (T < 1) throw InputError("disappointment_importance: T must be at least 1");
  if (shift_q.size() != exp.truth.size()) {
    throw InputError("disappointment_importance: shift dimension mismatch");
  }
  if (!shift_q.is_interior()) {
    throw DomainError("disappointment_importance: shift distribution must be interior");
  }
  const std::size_t d = shift_q.size();
  std::vector<double> log_ratio(d);
  for (std::size_t i = 0; i < d; ++i) {
    log_ratio[i] = exp.truth[i] == 0.0 ? kNegInf : std::log(exp.truth[i]) - std::log(shift_q[i]);
  }

  struct Sums {
    double hit = 0.0;      // sum w 1{event}
    double hit_sq = 0.0;   // sum (w 1{event})^2
    double w = 0.0;        // sum w
    double w_sq = 0.0;     // sum w^2
  };
  const std::uint64_t n_blocks = (n_samples + kSampleBlock - 1) / kSampleBlock;
  std::vector<Sums> partial(n_blocks);
  run_blocks(n_blocks, [&](std::size_t b) {
    CounterRng rng(seed, b);
    MemoizedEvent event(exp);
    Sums& acc = partial[b];
    const std::uint64_t count = std::min(kSampleBlock, n_samples - b * kSampleBlock);
    for (std::uint64_t s = 0; s < count; ++s) {
      const EmpiricalDistribution e = sample_counts(shift_q, T, rng);
      double lw = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        if (e[i] > 0) lw += static_cast<double>(e[i]) * log_ratio[i];
      }
      const double w = std::exp(lw);
      acc.w += w;
      acc.w_sq += w * w;
      if (w > 0.0 && event(e)) {
        acc.hit += w;
        acc.hit_sq += w * w;
      }
    }
  });
  Sums total;
  for (const auto& s : partial) {
    total.hit += s.hit;
    total.hit_sq += s.hit_sq;
    total.w += s.w;
    total.w_sq += s.w_sq;
  }
  const double n = static_cast<double>(n_samples);
  const double est = total.hit / n;
  const double se = std::sqrt(std::max(0.0, total.hit_sq / n - est * est) / n);
  const double ess = total.w_sq > 0.0 ? total.w * total.w / total.w_sq : 0.0;
  return base_report(exp, T, est > 0.0 ? std::log(est) : kNegInf,
                     ImportanceMethod{n_samples, shift_q, se, ess});
}

Distribution default_importance_shift(const Experiment& exp, std::uint64_t T) {
  const Distribution& p = exp.truth;
  if (!p.is_interior()) return p;
  double ratio = 0.0;
  switch (exp.predictor.kind) {
    case PredictorKind::Saa:
    case PredictorKind::Robust: return p;
    case PredictorKind::KlDro:
      ratio = exp.predictor.kl_radius ? *exp.predictor.kl_radius : exp.schedule.ratio(T);
      break;
    case PredictorKind::Svp: ratio = exp.schedule.ratio(T); break;
  }
  const std::size_t x = std::holds_alternative<PredictionMode>(exp.mode)
                            ? std::get<PredictionMode>(exp.mode).decision
                            : min_variance_minimizer(exp.problem, p);
  if (ratio <= 0.0 || variance(exp.problem, x, p) == 0.0) return p;

  const SimplexDelta phi = svp_direction(exp.problem, x, p);
  double step = std::sqrt(2.0 * ratio);
  std::vector<double> q(p.size());
  for (int k = 0; k < 64; ++k, step *= 0.5) {
    bool ok = true;
    for (std::size_t i = 0; i < q.size(); ++i) {
      q[i] = p[i] - step * phi[i];
      ok = ok && q[i] >= 0.05 * p[i];
    }
    if (ok) return Distribution(q);
  }
  return p;
}

std::vector<RatePoint> rate_curve(const Experiment& exp, std::vector<std::uint64_t> T_list,
                                  const RateCurveOptions& options) {
  std::sort(T_list.begin(), T_list.end());
  std::vector<RatePoint> out;
  out.reserve(T_list.size());
  for (const std::uint64_t T : T_list) {
    DisappointmentReport rep =
        lattice_size(T, exp.truth.size()) <= options.cap
            ? disappointment_exact(exp, T, options.cap)
            : disappointment_importance(exp, T, default_importance_shift(exp, T),
                                        options.n_samples, options.seed + T);
    out.push_back(RatePoint{T, rep.a_T, rep.rate, std::move(rep)});
  }
  return out;
}

ExtendedReal theoretical_rate_saa(const Problem& problem, std::size_t x, const Distribution& p,
                                  std::optional<double> level) {
  const auto l = problem.loss.row(x);
  if (p.size() != l.size()) throw InputError("theoretical_rate_saa: dimension mismatch");
  const double mean = cost(problem, x, p);
  const double m = level.value_or(mean);
  if (m >= mean) return ExtendedReal(0.0);

  double lmin = std::numeric_limits<double>::infinity();
  double lmax = -lmin;
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (p[i] <= 0.0) continue;
    lmin = std::min(lmin, l[i]);
    lmax = std::max(lmax, l[i]);
  }
  if (m < lmin) return ExtendedReal::infinity();
  if (m == lmin) {
    double mass = 0.0;
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (p[i] > 0.0 && l[i] == lmin) mass += p[i];
    }
    return ExtendedReal(-std::log(mass));
  }

  // log sum_i p(i) e^{lambda l_i}, shifted by lambda * lmin for stability
  // at large negative lambda.
  auto log_mgf = [&](double lambda) {
    double s = 0.0;
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (p[i] > 0.0) s += p[i] * std::exp(lambda * (l[i] - lmin));
    }
    return lambda * lmin + std::log(s);
  };
  auto tilted_mean = [&](double lambda) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (p[i] <= 0.0) continue;
      const double w = p[i] * std::exp(lambda * (l[i] - lmin));
      num += w * l[i];
      den += w;
    }
    return num / den;
  };

  // The objective is concave in lambda; its derivative m - tilted_mean(lambda)
  // is increasing, negative at 0 would mean m > mean, so the root is < 0.
  double hi = 0.0;
  double lo = -1.0 / (lmax - lmin);
  int guard = 0;
  while (tilted_mean(lo) > m) {
    lo *= 2.0;
    if (++guard > 2000) throw ConvergenceError("theoretical_rate_saa: no bracket", lo, hi);
  }
  for (int it = 0; it < 500 && hi - lo > 1e-13 * (1.0 + std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (tilted_mean(mid) > m) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  const double lambda = 0.5 * (lo + hi);
  return ExtendedReal(std::max(0.0, lambda * m - log_mgf(lambda)));
}

}  // namespace drolab
