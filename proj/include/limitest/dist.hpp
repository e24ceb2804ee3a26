#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "limitest/numeric.hpp"

namespace limitest {

/// Thrown when a Poissonized sample has no observations to normalize.
struct DegenerateSampleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// (master_seed, stream_index) deterministically identifies an independent
/// random stream; trial t of an experiment owns stream_index = t.
struct RngSeed {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_index = 0;
};

/// Counter-based generator (SplitMix64 core). Streams derived from distinct
/// (master_seed, stream_index) pairs are decorrelated by double mixing, so
/// parallel trials reproduce bit-identically regardless of scheduling.
class RandomStream {
 public:
  explicit RandomStream(RngSeed seed) noexcept {
    const std::uint64_t a = mix(seed.master_seed ^ 0x5851F42D4C957F2DULL);
    const std::uint64_t b = mix(seed.stream_index + 0x14057B7EF767814FULL);
    state_ = mix(a ^ (b + kGamma));
  }

  std::uint64_t next_u64() noexcept {
    state_ += kGamma;
    return mix(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() noexcept { return (next_u64() >> 11) * 0x1.0p-53; }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  static std::uint64_t mix(std::uint64_t z) noexcept {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }
  std::uint64_t state_;
};

/// Probability vector over the alphabet {0..S-1}. Strict instances sum to 1
/// within 1e-12; relaxed instances (Poissonized empiricals, perturbed
/// fixtures) only require nonnegative entries and are rejected by strict
/// operations.
class FiniteDistribution {
 public:
  static FiniteDistribution strict(std::vector<double> probs) {
    validate_entries(probs);
    KahanSum s;
    for (double p : probs) s.add(p);
    if (std::abs(s.value() - 1.0) > 1e-12)
      throw std::invalid_argument("FiniteDistribution: entries must sum to 1 (got " +
                                  std::to_string(s.value()) + ")");
    return FiniteDistribution(std::move(probs), false);
  }

  static FiniteDistribution relaxed(std::vector<double> probs) {
    validate_entries(probs);
    return FiniteDistribution(std::move(probs), true);
  }

  std::size_t support_size() const noexcept { return probs_.size(); }
  bool is_relaxed() const noexcept { return relaxed_; }
  double operator[](std::size_t i) const { return probs_[i]; }
  const std::vector<double>& probs() const noexcept { return probs_; }

  double total_mass() const noexcept {
    KahanSum s;
    for (double p : probs_) s.add(p);
    return s.value();
  }

 private:
  FiniteDistribution(std::vector<double> probs, bool relaxed)
      : probs_(std::move(probs)), relaxed_(relaxed) {}

  static void validate_entries(const std::vector<double>& probs) {
    if (probs.empty()) throw std::invalid_argument("FiniteDistribution: empty support");
    for (double p : probs) {
      if (!(p >= 0.0) || !std::isfinite(p))
        throw std::invalid_argument("FiniteDistribution: entries must be finite and >= 0");
    }
  }

  std::vector<double> probs_;
  bool relaxed_;
};

enum class SamplingMode { Multinomial, Poissonized };

/// Integer count vector tagged with how it was drawn. Multinomial counts
/// sum exactly to nominal_n; Poissonized counts carry no sum constraint.
struct EmpiricalCounts {
  std::vector<std::uint64_t> counts;
  std::uint64_t nominal_n = 0;
  SamplingMode mode = SamplingMode::Multinomial;

  EmpiricalCounts(std::vector<std::uint64_t> c, std::uint64_t n, SamplingMode m)
      : counts(std::move(c)), nominal_n(n), mode(m) {
    if (counts.empty()) throw std::invalid_argument("EmpiricalCounts: empty support");
    if (n == 0) throw std::invalid_argument("EmpiricalCounts: nominal_n must be positive");
    if (mode == SamplingMode::Multinomial && total() != n)
      throw std::invalid_argument("EmpiricalCounts: multinomial counts must sum to n");
  }

  std::uint64_t total() const noexcept {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
};

inline FiniteDistribution make_uniform(std::size_t support_size) {
  if (support_size == 0) throw std::invalid_argument("make_uniform: S must be >= 1");
  return FiniteDistribution::strict(
      std::vector<double>(support_size, 1.0 / static_cast<double>(support_size)));
}

/// probs[i] proportional to (i+1)^(-beta); beta = 0 is uniform.
inline FiniteDistribution make_zipf(std::size_t support_size, double beta) {
  if (support_size == 0) throw std::invalid_argument("make_zipf: S must be >= 1");
  if (!(beta >= 0.0)) throw std::invalid_argument("make_zipf: beta must be >= 0");
  std::vector<double> w(support_size);
  KahanSum total;
  for (std::size_t i = 0; i < support_size; ++i) {
    w[i] = std::pow(static_cast<double>(i + 1), -beta);
    total.add(w[i]);
  }
  const double inv = 1.0 / total.value();
  for (double& x : w) x *= inv;
  return FiniteDistribution::strict(std::move(w));
}

namespace detail {

/// Knuth product-of-uniforms sampler, chunked so exp(-lambda) never
/// underflows. Exact for all lambda; cost O(lambda) draws.
inline std::uint64_t sample_poisson(RandomStream& rng, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("sample_poisson: lambda must be finite and >= 0");
  std::uint64_t k = 0;
  while (lambda > 0.0) {
    const double chunk = std::min(lambda, 20.0);
    const double limit = std::exp(-chunk);
    double prod = 1.0;
    std::uint64_t x = 0;
    for (;;) {
      prod *= rng.next_double();
      if (prod <= limit) break;
      ++x;
    }
    k += x;
    lambda -= chunk;
  }
  return k;
}

inline std::vector<double> cumulative(const std::vector<double>& probs) {
  std::vector<double> cum(probs.size());
  KahanSum s;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    s.add(probs[i]);
    cum[i] = s.value();
  }
  cum.back() = std::max(cum.back(), 1.0);  // guard the last bucket
  return cum;
}

inline std::uint32_t draw_symbol(RandomStream& rng, const std::vector<double>& cum) {
  const double u = rng.next_double();
  const auto it = std::upper_bound(cum.begin(), cum.end(), u);
  return static_cast<std::uint32_t>(std::min<std::ptrdiff_t>(
      it - cum.begin(), static_cast<std::ptrdiff_t>(cum.size()) - 1));
}

}  // namespace detail

/// One i.i.d. sequence of length n; symbols are 0-based indices.
inline std::vector<std::uint32_t> sample_sequence(const FiniteDistribution& dist,
                                                  std::uint64_t n, RngSeed seed) {
  if (dist.is_relaxed())
    throw std::invalid_argument("sample_sequence: strict distribution required");
  if (n == 0) throw std::invalid_argument("sample_sequence: n must be >= 1");
  RandomStream rng(seed);
  const auto cum = detail::cumulative(dist.probs());
  std::vector<std::uint32_t> seq(n);
  for (auto& x : seq) x = detail::draw_symbol(rng, cum);
  return seq;
}

inline EmpiricalCounts counts_from_sequence(const std::vector<std::uint32_t>& seq,
                                            std::size_t support_size) {
  std::vector<std::uint64_t> counts(support_size, 0);
  for (auto x : seq) counts.at(x) += 1;
  return EmpiricalCounts(std::move(counts), seq.size(), SamplingMode::Multinomial);
}

/// Multinomial mode draws one multinomial(n, dist) vector by inverse-CDF;
/// Poissonized mode draws independent Poisson(n * p_i) per symbol (relaxed
/// source vectors are allowed there, matching the perturbed-prior fixtures).
inline EmpiricalCounts sample_counts(const FiniteDistribution& dist, std::uint64_t n,
                                     SamplingMode mode, RngSeed seed) {
  if (n == 0) throw std::invalid_argument("sample_counts: n must be >= 1");
  RandomStream rng(seed);
  std::vector<std::uint64_t> counts(dist.support_size(), 0);
  if (mode == SamplingMode::Multinomial) {
    if (dist.is_relaxed())
      throw std::invalid_argument("sample_counts: multinomial sampling requires a strict distribution");
    const auto cum = detail::cumulative(dist.probs());
    for (std::uint64_t i = 0; i < n; ++i) counts[detail::draw_symbol(rng, cum)] += 1;
  } else {
    for (std::size_t i = 0; i < dist.support_size(); ++i)
      counts[i] = detail::sample_poisson(rng, static_cast<double>(n) * dist[i]);
  }
  return EmpiricalCounts(std::move(counts), n, mode);
}

/// Entry i equals counts[i] / nominal_n. Multinomial counts give a strict
/// distribution; Poissonized counts give a relaxed one (sum may differ
/// from 1) and an all-zero Poissonized sample is an error.
inline FiniteDistribution empirical_distribution(const EmpiricalCounts& counts) {
  std::vector<double> p(counts.counts.size());
  const double inv = 1.0 / static_cast<double>(counts.nominal_n);
  for (std::size_t i = 0; i < p.size(); ++i)
    p[i] = static_cast<double>(counts.counts[i]) * inv;
  if (counts.mode == SamplingMode::Poissonized) {
    if (counts.total() == 0)
      throw DegenerateSampleError("empirical_distribution: all-zero Poissonized sample");
    return FiniteDistribution::relaxed(std::move(p));
  }
  return FiniteDistribution::strict(std::move(p));
}

}  // namespace limitest
