#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "limitest/classify.hpp"
#include "limitest/dist.hpp"
#include "limitest/numeric.hpp"
#include "limitest/prob.hpp"

namespace limitest {

/// Default sweep for the tail-bound and difference-bound verifiers.
struct LemmaGrid {
  std::vector<double> lambdas{0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0};
  std::vector<double> deltas{0.1, 0.2, 0.5, 1.0, 2.0, 4.0};
  std::vector<std::uint64_t> ns{30, 100, 1000};
};

struct LemmaCheckReport {
  std::string grid_description;
  double max_ratio_m1 = 0.0;
  double max_ratio_m2 = 0.0;
  bool pass = false;
};

/// Checks, with exact CDFs, that for X ~ Poi(lambda) or B(n, lambda/n):
///   P(X >= (1+delta) lambda) <= exp(-delta^2 lambda / 3) v exp(-delta lambda / 3)
///   P(X <= (1-delta) lambda) <= exp(-delta^2 lambda / 2)
/// The reported ratios are tail / bound maxima; pass means both <= 1.
inline LemmaCheckReport verify_poisson_tail(const LemmaGrid& grid = LemmaGrid{}) {
  LemmaCheckReport rep;
  std::size_t points = 0;
  for (const double lambda : grid.lambdas) {
    for (const double delta : grid.deltas) {
      if (!(delta > 0.0) || !(lambda > 0.0)) continue;
      const double upper_bound =
          std::max(std::exp(-delta * delta * lambda / 3.0), std::exp(-delta * lambda / 3.0));
      const double lower_bound = std::exp(-delta * delta * lambda / 2.0);
      for (int law = 0; law < 2; ++law) {
        const bool poisson = law == 0;
        std::vector<std::uint64_t> ns = poisson ? std::vector<std::uint64_t>{0} : grid.ns;
        for (const std::uint64_t n : ns) {
          if (!poisson && static_cast<double>(n) < lambda) continue;
          const double p = poisson ? 0.0 : lambda / static_cast<double>(n);
          const double up = upper_tail_at_least(poisson, lambda, n, p, (1.0 + delta) * lambda);
          rep.max_ratio_m1 = std::max(rep.max_ratio_m1, up / upper_bound);
          const double lo = lower_tail_at_most(poisson, lambda, n, p, (1.0 - delta) * lambda);
          rep.max_ratio_m2 = std::max(rep.max_ratio_m2, lo / lower_bound);
          ++points;
        }
      }
    }
  }
  std::ostringstream desc;
  desc << "tail bounds over " << points << " (lambda, delta, law) points";
  rep.grid_description = desc.str();
  rep.pass = rep.max_ratio_m1 <= 1.0 + 1e-9 && rep.max_ratio_m2 <= 1.0 + 1e-9;
  return rep;
}

inline constexpr double kPoissonDifferenceGuard = 5.0;

/// Measures the constants in the two difference bounds
///   (lambda2 - lambda1) P(X >= lambda2) <= M1 (lambda2 ^ sqrt(lambda2)),
///       X ~ law(lambda1), 0 <= lambda1 <= lambda2 <= n
///   (lambda1 - lambda2) P(X <= lambda2) <= M2 sqrt(lambda2),
///       X ~ law(lambda1), lambda1 >= lambda2 >= 1
/// and asserts both stay below the conservative guard of 5. The measured
/// maxima are always reported so the guard can be tightened.
inline LemmaCheckReport verify_poisson_difference(const LemmaGrid& grid = LemmaGrid{}) {
  LemmaCheckReport rep;
  std::size_t points = 0;
  for (const double l1 : grid.lambdas) {
    for (const double l2 : grid.lambdas) {
      for (int law = 0; law < 2; ++law) {
        const bool poisson = law == 0;
        std::vector<std::uint64_t> ns = poisson ? std::vector<std::uint64_t>{0} : grid.ns;
        for (const std::uint64_t n : ns) {
          if (!poisson && static_cast<double>(n) < l1) continue;
          const double p = poisson ? 0.0 : l1 / static_cast<double>(n);
          if (l1 <= l2 && (poisson || static_cast<double>(n) >= l2)) {
            const double lhs = (l2 - l1) * upper_tail_at_least(poisson, l1, n, p, l2);
            const double rhs = std::min(l2, std::sqrt(l2));
            if (rhs > 0.0) rep.max_ratio_m1 = std::max(rep.max_ratio_m1, lhs / rhs);
            ++points;
          }
          if (l1 >= l2 && l2 >= 1.0) {
            const double lhs = (l1 - l2) * lower_tail_at_most(poisson, l1, n, p, l2);
            rep.max_ratio_m2 = std::max(rep.max_ratio_m2, lhs / std::sqrt(l2));
            ++points;
          }
        }
      }
    }
  }
  std::ostringstream desc;
  desc << "difference bounds over " << points << " (lambda1, lambda2, law) points";
  rep.grid_description = desc.str();
  rep.pass = rep.max_ratio_m1 <= kPoissonDifferenceGuard && rep.max_ratio_m2 <= kPoissonDifferenceGuard;
  return rep;
}

// ---------------------------------------------------------------------------
// Lower-bound prior fixture.

inline constexpr double kLowerBoundCMax = 0.41218031767503205;  // sqrt(e)/4

/// Generator of the 2^S perturbed vectors
///   R_tau(i) = q_i + tau_i * c * (q_i ^ sqrt(q_i / n)),  tau in {-1, +1}^S.
/// The vectors are nonnegative but generally not probability distributions;
/// the L1 separation from q equals c * sum_i (q_i ^ sqrt(q_i/n)) for every tau.
struct LowerBoundPrior {
  FiniteDistribution q;
  std::uint64_t n;
  double c;

  LowerBoundPrior(FiniteDistribution q_, std::uint64_t n_, double c_)
      : q(std::move(q_)), n(n_), c(c_) {
    if (n == 0) throw std::invalid_argument("LowerBoundPrior: n must be >= 1");
    if (!(c > 0.0 && c <= kLowerBoundCMax))
      throw std::invalid_argument("LowerBoundPrior: c must lie in (0, sqrt(e)/4]");
  }

  std::size_t support_size() const noexcept { return q.support_size(); }

  std::vector<double> perturbation() const {
    std::vector<double> d(q.support_size());
    for (std::size_t i = 0; i < d.size(); ++i)
      d[i] = c * std::min(q[i], std::sqrt(q[i] / static_cast<double>(n)));
    return d;
  }

  std::vector<double> r_tau_signs(std::span<const signed char> signs) const {
    const std::vector<double> d = perturbation();
    std::vector<double> r(q.support_size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      r[i] = q[i] + (signs[i] > 0 ? d[i] : -d[i]);
      if (r[i] < 0.0) r[i] = 0.0;  // c <= 1 keeps this a no-op up to rounding
    }
    return r;
  }

  /// tau given as a bitmask (S <= 64): bit i set means tau_i = +1.
  std::vector<double> r_tau(std::uint64_t tau_mask) const {
    if (q.support_size() > 64)
      throw std::invalid_argument("LowerBoundPrior: bitmask form needs S <= 64");
    std::vector<signed char> signs(q.support_size());
    for (std::size_t i = 0; i < signs.size(); ++i)
      signs[i] = ((tau_mask >> i) & 1ULL) ? 1 : -1;
    return r_tau_signs(signs);
  }

  double separation() const {
    KahanSum s;
    for (const double d : perturbation()) s.add(d);
    return s.value();
  }
};

struct LowerBoundFixtureReport {
  double tau_average = 0.0;     // average over tau of the exact expected regret
  double bound = 0.0;           // (c/8) * sum_i q_i ^ sqrt(q_i/n)
  double mc_stderr = 0.0;       // 0 when tau is enumerated exhaustively
  std::uint64_t tau_count = 0;
  bool exhaustive = true;
};

/// Averages the exact Poissonized expected regret of a count-measurable
/// rule over the perturbed prior. Any such rule must sit above
/// (c/8) * sum q_i ^ sqrt(q_i/n); exhaustive enumeration (S <= 20) makes
/// the comparison noise-free.
inline LowerBoundFixtureReport bayes_regret_lower_fixture(const LowerBoundPrior& prior,
                                                          const ThresholdRule& rule,
                                                          std::uint64_t sampled_tau = 0,
                                                          RngSeed seed = RngSeed{}) {
  const std::size_t S = prior.support_size();
  LowerBoundFixtureReport rep;
  rep.bound = prior.separation() / 8.0;  // separation already carries the c factor
  const std::span<const double> q(prior.q.probs());
  if (sampled_tau == 0) {
    if (S > 20)
      throw std::invalid_argument("bayes_regret_lower_fixture: exhaustive tau needs S <= 20");
    const std::uint64_t count = 1ULL << S;
    KahanSum sum;
    for (std::uint64_t mask = 0; mask < count; ++mask) {
      const std::vector<double> r = prior.r_tau(mask);
      sum.add(detail::expected_envelope_regret_relaxed(rule, r, q, prior.n,
                                                       SamplingMode::Poissonized));
    }
    rep.tau_average = sum.value() / static_cast<double>(count);
    rep.tau_count = count;
    rep.exhaustive = true;
  } else {
    RandomStream rng(seed);
    KahanSum sum, sumsq;
    std::vector<signed char> signs(S);
    for (std::uint64_t t = 0; t < sampled_tau; ++t) {
      for (std::size_t i = 0; i < S; ++i) signs[i] = rng.next_double() < 0.5 ? 1 : -1;
      const std::vector<double> r = prior.r_tau_signs(signs);
      const double g = detail::expected_envelope_regret_relaxed(rule, r, q, prior.n,
                                                                SamplingMode::Poissonized);
      sum.add(g);
      sumsq.add(g * g);
    }
    const double mean = sum.value() / static_cast<double>(sampled_tau);
    rep.tau_average = mean;
    rep.tau_count = sampled_tau;
    rep.exhaustive = false;
    if (sampled_tau > 1) {
      const double var =
          std::max(0.0, (sumsq.value() - static_cast<double>(sampled_tau) * mean * mean) /
                            static_cast<double>(sampled_tau - 1));
      rep.mc_stderr = std::sqrt(var / static_cast<double>(sampled_tau));
    }
  }
  return rep;
}

}  // namespace limitest
