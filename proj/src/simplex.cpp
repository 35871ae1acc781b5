#include "drolab/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "drolab/error.hpp"

namespace drolab {

std::string CapExceeded::format_size(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

namespace {

constexpr double kNormalizeRejectTol = 1e-6;
constexpr double kNegativeDust = 1e-12;

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw InputError(std::string(what) + ": dimension mismatch (" + std::to_string(a) + " vs " +
                     std::to_string(b) + ")");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Distribution

Distribution::Distribution(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw ValidationError("simplex", "distribution has no scenarios");
  double sum = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    double& w = weights_[i];
    if (!std::isfinite(w)) {
      throw ValidationError("simplex", "weight " + std::to_string(i) + " is not finite");
    }
    if (w < 0.0) {
      if (w < -kNegativeDust) {
        throw ValidationError("simplex", "weight " + std::to_string(i) + " is negative (" +
                                             std::to_string(w) + ")");
      }
      w = 0.0;
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > kNormalizeRejectTol) {
    std::ostringstream os;
    os.precision(17);
    os << "weights sum to " << sum << ", expected 1";
    throw ValidationError("simplex", os.str());
  }
  for (double& w : weights_) w /= sum;
}

Distribution Distribution::uniform(std::size_t d) {
  return Distribution(std::vector<double>(d, 1.0 / static_cast<double>(d)));
}

Distribution Distribution::vertex(std::size_t d, std::size_t i) {
  std::vector<double> w(d, 0.0);
  w.at(i) = 1.0;
  return Distribution(std::move(w));
}

bool Distribution::is_interior() const {
  return std::all_of(weights_.begin(), weights_.end(), [](double w) { return w > 0.0; });
}

double Distribution::min_weight() const {
  return *std::min_element(weights_.begin(), weights_.end());
}

// ---------------------------------------------------------------------------
// EmpiricalDistribution

EmpiricalDistribution::EmpiricalDistribution(std::vector<std::uint64_t> counts)
    : counts_(std::move(counts)) {
  if (counts_.empty()) throw ValidationError("lattice", "empirical distribution has no scenarios");
  sample_size_ = std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
  if (sample_size_ == 0) throw ValidationError("lattice", "sample size must be at least 1");
}

Distribution EmpiricalDistribution::to_distribution() const {
  std::vector<double> w(counts_.size());
  const double T = static_cast<double>(sample_size_);
  for (std::size_t i = 0; i < counts_.size(); ++i) w[i] = static_cast<double>(counts_[i]) / T;
  return Distribution(std::move(w));
}

bool EmpiricalDistribution::is_interior() const {
  return std::all_of(counts_.begin(), counts_.end(), [](std::uint64_t c) { return c > 0; });
}

// ---------------------------------------------------------------------------
// SimplexDelta

SimplexDelta::SimplexDelta(std::vector<double> components) : components_(std::move(components)) {
  double sum = 0.0;
  double l1 = 0.0;
  for (double c : components_) {
    if (!std::isfinite(c)) throw ValidationError("tangent", "component is not finite");
    sum += c;
    l1 += std::abs(c);
  }
  if (std::abs(sum) > 1e-12 * std::max(1.0, l1)) {
    throw ValidationError("tangent", "components sum to " + std::to_string(sum) + ", expected 0");
  }
}

SimplexDelta SimplexDelta::between(const Distribution& to, const Distribution& from) {
  require_same_size(to.size(), from.size(), "SimplexDelta::between");
  std::vector<double> c(to.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = to[i] - from[i];
  return SimplexDelta(std::move(c));
}

// ---------------------------------------------------------------------------
// Divergences

ExtendedReal kl_divergence(const Distribution& p, const Distribution& q) {
  require_same_size(p.size(), q.size(), "kl_divergence");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return ExtendedReal::infinity();
    sum += p[i] * std::log(p[i] / q[i]);
  }
  // Rounding can push the sum of a near-zero divergence below zero.
  return ExtendedReal(std::max(0.0, sum));
}

double ellipsoid_norm_sq(const SimplexDelta& delta, const Distribution& p) {
  require_same_size(delta.size(), p.size(), "ellipsoid_norm_sq");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) {
      throw DomainError("ellipsoid_norm_sq: weight " + std::to_string(i) +
                        " is zero; the local norm needs an interior point");
    }
    sum += delta[i] * delta[i] / p[i];
  }
  return 0.5 * sum;
}

double multinomial_log_prob(const EmpiricalDistribution& e, const Distribution& p) {
  require_same_size(e.size(), p.size(), "multinomial_log_prob");
  double lp = std::lgamma(static_cast<double>(e.sample_size()) + 1.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto c = e[i];
    if (c == 0) continue;
    if (p[i] == 0.0) return -std::numeric_limits<double>::infinity();
    const double cd = static_cast<double>(c);
    lp += cd * std::log(p[i]) - std::lgamma(cd + 1.0);
  }
  return lp;
}

// ---------------------------------------------------------------------------
// Lattice

namespace {

// C(n + k - 1, k - 1) saturated at UINT64_MAX.
std::uint64_t compositions(std::uint64_t n, std::size_t k) {
  if (k == 0) return n == 0 ? 1 : 0;
  unsigned __int128 c = 1;
  constexpr unsigned __int128 kMax = std::numeric_limits<std::uint64_t>::max();
  for (std::uint64_t i = 1; i < k; ++i) {
    c = c * (n + i) / i;
    if (c > kMax) return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(c);
}

}  // namespace

double lattice_size(std::uint64_t T, std::size_t d) {
  if (d == 0) return 0.0;
  // lgamma keeps the estimate finite well past the uint64 range.
  const double n = static_cast<double>(T);
  const double k = static_cast<double>(d);
  const double log_size = std::lgamma(n + k) - std::lgamma(n + 1.0) - std::lgamma(k);
  if (log_size < 40.0) return static_cast<double>(compositions(T, d));
  return std::min(std::exp(log_size), std::numeric_limits<double>::max());
}

Lattice::Lattice(std::uint64_t T, std::size_t d, double cap) : T_(T), d_(d) {
  if (T < 1) throw InputError("lattice: sample size T must be at least 1");
  if (d < 2) throw InputError("lattice: dimension d must be at least 2");
  const double n = lattice_size(T, d);
  if (n > cap || n >= 9007199254740992.0) throw CapExceeded(n, cap);
  size_ = compositions(T, d);
}

std::vector<std::uint64_t> Lattice::unrank(std::uint64_t rank) const {
  if (rank >= size_) throw InputError("lattice: rank out of range");
  std::vector<std::uint64_t> c(d_, 0);
  std::uint64_t remaining = T_;
  for (std::size_t pos = 0; pos + 1 < d_; ++pos) {
    std::uint64_t v = 0;
    for (;; ++v) {
      const std::uint64_t block = compositions(remaining - v, d_ - pos - 1);
      if (rank < block) break;
      rank -= block;
    }
    c[pos] = v;
    remaining -= v;
  }
  c[d_ - 1] = remaining;
  return c;
}

void Lattice::for_each(std::uint64_t begin, std::uint64_t end,
                       const std::function<void(const EmpiricalDistribution&)>& fn) const {
  end = std::min(end, size_);
  if (begin >= end) return;
  std::vector<std::uint64_t> c = unrank(begin);
  for (std::uint64_t r = begin;;) {
    fn(EmpiricalDistribution(c));
    if (++r == end) break;
    // Successor: bump the rightmost free coordinate that has mass to its
    // right, and move the remaining mass into the last coordinate.
    std::uint64_t right = c[d_ - 1];
    std::size_t j = d_ - 1;
    while (j > 0) {
      --j;
      if (right > 0) break;
      right += c[j];
    }
    c[j] += 1;
    for (std::size_t k = j + 1; k + 1 < d_; ++k) c[k] = 0;
    c[d_ - 1] = right - 1;
  }
}

std::vector<EmpiricalDistribution> Lattice::collect() const {
  std::vector<EmpiricalDistribution> out;
  out.reserve(size_);
  for_each([&](const EmpiricalDistribution& e) { out.push_back(e); });
  return out;
}

// ---------------------------------------------------------------------------
// Random numbers

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(mix64(seed + kGolden) ^ mix64(stream * kGolden + 0x632BE59BD9B4E019ULL))) {}

CounterRng::result_type CounterRng::operator()() {
  return mix64(key_ + (++counter_) * kGolden);
}

double CounterRng::uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

EmpiricalDistribution sample_counts(const Distribution& p, std::uint64_t T, CounterRng& rng) {
  if (T < 1) throw InputError("sample_counts: T must be at least 1");
  const std::size_t d = p.size();
  std::vector<std::uint64_t> counts(d, 0);
  std::uint64_t remaining = T;
  double rest = 1.0;
  for (std::size_t i = 0; i + 1 < d && remaining > 0; ++i) {
    const double w = p[i];
    if (w <= 0.0) {
      rest -= w;
      continue;
    }
    const double prob = rest > 0.0 ? std::clamp(w / rest, 0.0, 1.0) : 1.0;
    std::uint64_t c;
    if (prob >= 1.0) {
      c = remaining;
    } else {
      std::binomial_distribution<long long> binom(static_cast<long long>(remaining), prob);
      c = static_cast<std::uint64_t>(binom(rng));
    }
    counts[i] = c;
    remaining -= c;
    rest -= w;
  }
  // Whatever is left goes to the last scenario with positive weight.
  if (remaining > 0) {
    std::size_t last = d - 1;
    while (last > 0 && p[last] <= 0.0) --last;
    counts[last] += remaining;
  }
  return EmpiricalDistribution(std::move(counts));
}

EmpiricalDistribution sample_empirical(const Distribution& p, std::uint64_t T, std::uint64_t seed) {
  CounterRng rng(seed, 0);
  return sample_counts(p, T, rng);
}

// ---------------------------------------------------------------------------
// LogSumAccumulator

void LogSumAccumulator::add(double log_term) {
  if (log_term == -std::numeric_limits<double>::infinity()) return;
  if (log_term > max_) {
    scaled_ = scaled_ * std::exp(max_ - log_term) + 1.0;
    max_ = log_term;
  } else {
    scaled_ += std::exp(log_term - max_);
  }
}

void LogSumAccumulator::merge(const LogSumAccumulator& other) {
  if (other.scaled_ == 0.0) return;
  if (scaled_ == 0.0) {
    *this = other;
    return;
  }
  if (other.max_ > max_) {
    scaled_ = scaled_ * std::exp(max_ - other.max_) + other.scaled_;
    max_ = other.max_;
  } else {
    scaled_ += other.scaled_ * std::exp(other.max_ - max_);
  }
}

double LogSumAccumulator::log_sum() const {
  if (scaled_ == 0.0) return -std::numeric_limits<double>::infinity();
  return max_ + std::log(scaled_);
}

}  // namespace drolab
