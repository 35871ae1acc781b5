#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace drolab {

/// Nonnegative real extended with +infinity. Used for divergences and rate
/// functions, where an infinite value is a legitimate answer rather than an
/// error (e.g. support mismatch in the relative entropy).
class ExtendedReal {
 public:
  constexpr ExtendedReal() = default;
  constexpr explicit ExtendedReal(double v) : value_(v) {}
  static constexpr ExtendedReal infinity() {
    return ExtendedReal(std::numeric_limits<double>::infinity());
  }

  constexpr bool is_finite() const { return value_ < std::numeric_limits<double>::infinity(); }
  constexpr double value() const { return value_; }

  friend constexpr bool operator<=(ExtendedReal a, double b) { return a.is_finite() && a.value_ <= b; }
  friend constexpr bool operator<(ExtendedReal a, double b) { return a.is_finite() && a.value_ < b; }
  friend constexpr bool operator==(ExtendedReal a, ExtendedReal b) = default;

 private:
  double value_ = 0.0;
};

/// A point of the probability simplex over d scenarios.
class Distribution {
 public:
  /// Normalizes `weights` to sum to one. Rejects negative entries beyond
  /// float dust and sums that are more than 1e-6 away from one.
  explicit Distribution(std::vector<double> weights);

  static Distribution uniform(std::size_t d);
  static Distribution vertex(std::size_t d, std::size_t i);

  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }
  std::span<const double> weights() const { return weights_; }

  bool is_interior() const;
  double min_weight() const;

  friend bool operator==(const Distribution&, const Distribution&) = default;

 private:
  std::vector<double> weights_;
};

/// Counts of T draws over d scenarios: a point of the lattice of possible
/// empirical distributions.
class EmpiricalDistribution {
 public:
  explicit EmpiricalDistribution(std::vector<std::uint64_t> counts);

  std::size_t size() const { return counts_.size(); }
  std::uint64_t sample_size() const { return sample_size_; }
  std::span<const std::uint64_t> counts() const { return counts_; }
  std::uint64_t operator[](std::size_t i) const { return counts_[i]; }

  /// weights counts(i)/T, each a correctly rounded quotient of integers.
  Distribution to_distribution() const;
  bool is_interior() const;

  friend bool operator==(const EmpiricalDistribution&, const EmpiricalDistribution&) = default;

 private:
  std::vector<std::uint64_t> counts_;
  std::uint64_t sample_size_ = 0;
};

/// A direction tangent to the simplex: components sum to zero.
class SimplexDelta {
 public:
  explicit SimplexDelta(std::vector<double> components);
  static SimplexDelta between(const Distribution& to, const Distribution& from);

  std::size_t size() const { return components_.size(); }
  double operator[](std::size_t i) const { return components_[i]; }
  std::span<const double> components() const { return components_; }

 private:
  std::vector<double> components_;
};

/// Relative entropy I(p, q) = sum p(i) log(p(i)/q(i)) with 0 log(0/.) = 0
/// and +infinity when p puts mass where q does not.
ExtendedReal kl_divergence(const Distribution& p, const Distribution& q);

/// Local ellipsoid norm 0.5 * sum delta_i^2 / p(i). Requires interior p.
double ellipsoid_norm_sq(const SimplexDelta& delta, const Distribution& p);

/// log of the multinomial probability of observing `e` under p^T.
/// Returns -infinity when e has counts on a zero-weight scenario.
double multinomial_log_prob(const EmpiricalDistribution& e, const Distribution& p);

inline constexpr double kDefaultLatticeCap = 1e8;

/// Number of compositions of T into d nonnegative parts, C(T+d-1, d-1).
/// Saturates at the largest finite double instead of overflowing.
double lattice_size(std::uint64_t T, std::size_t d);

/// The lattice of empirical distributions with T samples over d scenarios.
///
/// Points are ordered lexicographically with the first count most
/// significant: (0,...,0,T) first, (T,0,...,0) last. The order is fixed so
/// that [begin, end) index ranges can be processed independently and
/// reduced in index order with bit-identical results.
class Lattice {
 public:
  Lattice(std::uint64_t T, std::size_t d, double cap = kDefaultLatticeCap);

  std::uint64_t sample_size() const { return T_; }
  std::size_t dimension() const { return d_; }
  std::uint64_t size() const { return size_; }

  /// Counts of the point with the given rank.
  std::vector<std::uint64_t> unrank(std::uint64_t rank) const;

  /// Visits points with rank in [begin, end) in order.
  void for_each(std::uint64_t begin, std::uint64_t end,
                const std::function<void(const EmpiricalDistribution&)>& fn) const;
  void for_each(const std::function<void(const EmpiricalDistribution&)>& fn) const {
    for_each(0, size_, fn);
  }

  std::vector<EmpiricalDistribution> collect() const;

 private:
  std::uint64_t T_;
  std::size_t d_;
  std::uint64_t size_;
};

/// Counter-based generator: output k of stream (seed, stream) is a bijective
/// mix of (key, k). Streams are independent and can be consumed in any
/// order or on any thread. Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  double uniform01();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Draws counts ~ Multinomial(T, p) from `rng`.
EmpiricalDistribution sample_counts(const Distribution& p, std::uint64_t T, CounterRng& rng);

/// Deterministic multinomial sample keyed by `seed` (stream 0).
EmpiricalDistribution sample_empirical(const Distribution& p, std::uint64_t T, std::uint64_t seed);

/// Streaming log-sum-exp.
class LogSumAccumulator {
 public:
  void add(double log_term);
  void merge(const LogSumAccumulator& other);
  double log_sum() const;

 private:
  double max_ = -std::numeric_limits<double>::infinity();
  double scaled_ = 0.0;
};

}  // namespace drolab
