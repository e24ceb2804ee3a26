#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "limitest/dist.hpp"
#include "limitest/envelope.hpp"
#include "limitest/numeric.hpp"
#include "limitest/prob.hpp"
#include "limitest/regime.hpp"

namespace limitest {

/// Coordinatewise rule: symbol i joins the class-0 regime based only on
/// (count_i, q_i, n). This is what licenses exact expected-regret
/// evaluation through per-symbol binomial (or Poisson) marginals.
struct ThresholdRule {
  enum class Kind { MLE, TQ, Custom };
  Kind kind = Kind::MLE;
  std::function<bool(std::uint64_t count, double q_i, std::uint64_t n)> predicate;

  static ThresholdRule mle() { return ThresholdRule{Kind::MLE, {}}; }
  static ThresholdRule tq() { return ThresholdRule{Kind::TQ, {}}; }
  static ThresholdRule custom(std::function<bool(std::uint64_t, double, std::uint64_t)> fn) {
    return ThresholdRule{Kind::Custom, std::move(fn)};
  }

  bool includes(std::uint64_t count, double q_i, std::uint64_t n) const {
    switch (kind) {
      case Kind::MLE:
        return count_exceeds(count, q_i, n);
      case Kind::TQ:
        return count_exceeds(count, q_i, n) || q_below_reciprocal(q_i, n);
      case Kind::Custom:
        return predicate(count, q_i, n);
    }
    return false;
  }

  const char* name() const noexcept {
    switch (kind) {
      case Kind::MLE: return "mle";
      case Kind::TQ: return "tq";
      case Kind::Custom: return "custom";
    }
    return "?";
  }
};

struct RegretReport {
  enum class Method { Exact, MonteCarlo };
  double regret = 0.0;
  double rate_bound = 0.0;  // sum_i min(q_i, sqrt(q_i/n)), no leading constant
  double ratio = 0.0;
  Method method = Method::Exact;
  double mc_stderr = 0.0;
};

inline double regret_rate_bound(const FiniteDistribution& q, std::uint64_t n) {
  KahanSum s;
  for (std::size_t i = 0; i < q.support_size(); ++i)
    s.add(std::min(q[i], std::sqrt(q[i] / static_cast<double>(n))));
  return s.value();
}

/// The Scheffe set A = {i : r_i > q_i}; ties excluded.
inline DecisionRegime bayes_regime(const LabeledDistribution& ld) {
  if (!ld.balanced()) throw std::invalid_argument("bayes_regime: requires prior1 = 1/2");
  DecisionRegime regime(ld.support_size());
  for (std::size_t i = 0; i < ld.support_size(); ++i) regime.members[i] = ld.r[i] > ld.q[i];
  return regime;
}

/// Maximum-likelihood regime {i : count_i/n > q_i}.
inline DecisionRegime mle_classifier(const EmpiricalCounts& counts, const FiniteDistribution& q) {
  if (counts.counts.size() != q.support_size())
    throw std::invalid_argument("mle_classifier: mismatched support sizes");
  DecisionRegime regime(q.support_size());
  for (std::size_t i = 0; i < q.support_size(); ++i)
    regime.members[i] = count_exceeds(counts.counts[i], q[i], counts.nominal_n);
  return regime;
}

/// The rate-achieving regime {i : count_i/n > q_i} union {i : q_i < 1/n}.
inline DecisionRegime tq_classifier(const EmpiricalCounts& counts, const FiniteDistribution& q,
                                    std::uint64_t n) {
  if (counts.counts.size() != q.support_size())
    throw std::invalid_argument("tq_classifier: mismatched support sizes");
  DecisionRegime regime(q.support_size());
  for (std::size_t i = 0; i < q.support_size(); ++i)
    regime.members[i] =
        count_exceeds(counts.counts[i], q[i], n) || q_below_reciprocal(q[i], n);
  return regime;
}

namespace detail {

/// P(i in regime) under count_i ~ Binomial(n, r_i) (multinomial marginal)
/// or Poisson(n * r_i).
inline double rule_inclusion_probability(const ThresholdRule& rule, double r_i, double q_i,
                                         std::uint64_t n, SamplingMode mode) {
  const bool poisson = mode == SamplingMode::Poissonized;
  const double lambda = static_cast<double>(n) * r_i;
  if (rule.kind == ThresholdRule::Kind::TQ && q_below_reciprocal(q_i, n)) return 1.0;
  if (rule.kind != ThresholdRule::Kind::Custom) {
    const std::int64_t k = static_cast<std::int64_t>(std::floor(count_threshold(q_i, n)));
    return poisson ? 1.0 - poisson_cdf(lambda, k) : 1.0 - binomial_cdf(n, r_i, k);
  }
  // generic predicate: enumerate a mass-complete count window
  const double sd = std::sqrt(std::max(lambda, 1.0));
  const std::uint64_t lo =
      static_cast<std::uint64_t>(std::max(0.0, std::floor(lambda - 40.0 * sd - 5.0)));
  std::uint64_t hi = static_cast<std::uint64_t>(std::ceil(lambda + 40.0 * sd + 10.0));
  if (!poisson) hi = std::min<std::uint64_t>(hi, n);
  double pmf = poisson ? detail::poisson_pmf(lambda, lo) : detail::binom_pmf(n, r_i, lo);
  KahanSum s;
  for (std::uint64_t c = lo; c <= hi; ++c) {
    if (rule.includes(c, q_i, n)) s.add(pmf);
    if (poisson)
      pmf *= lambda / (static_cast<double>(c) + 1.0);
    else
      pmf *= (static_cast<double>(n - c) * r_i) / ((static_cast<double>(c) + 1.0) * (1.0 - r_i));
  }
  return std::min(s.value(), 1.0);
}

/// E[ell(regime; r, q)] = (1/4) L1(r, q) - (1/2) sum_i (r_i - q_i) P(i in regime).
/// Valid for relaxed (non-normalized) r vectors; used by the lower-bound
/// prior fixture where the perturbed vectors are not distributions.
inline double expected_envelope_regret_relaxed(const ThresholdRule& rule,
                                               std::span<const double> r,
                                               std::span<const double> q, std::uint64_t n,
                                               SamplingMode mode) {
  KahanSum l1, cross;
  for (std::size_t i = 0; i < r.size(); ++i) {
    l1.add(std::abs(r[i] - q[i]));
    cross.add((r[i] - q[i]) * rule_inclusion_probability(rule, r[i], q[i], n, mode));
  }
  return 0.25 * l1.value() - 0.5 * cross.value();
}

}  // namespace detail

inline constexpr std::uint64_t kMaxExactRegretN = 10000000;

/// Exact expected regret of a coordinatewise rule over the balanced family,
/// accumulated in the split form
///   (1/2) [ sum_{r>q} (r-q) P(i not in A^) + sum_{r<=q} (q-r) P(i in A^) ]
/// whose terms are all nonnegative.
inline RegretReport expected_regret_exact(const ThresholdRule& rule, const LabeledDistribution& ld,
                                          std::uint64_t n,
                                          SamplingMode mode = SamplingMode::Multinomial) {
  if (!ld.balanced())
    throw std::invalid_argument("expected_regret_exact: requires prior1 = 1/2");
  if (n == 0) throw std::invalid_argument("expected_regret_exact: n must be >= 1");
  if (n > kMaxExactRegretN)
    throw std::invalid_argument(
        "expected_regret_exact: n too large for exact CDF evaluation; use expected_regret_mc");
  KahanSum s;
  for (std::size_t i = 0; i < ld.support_size(); ++i) {
    const double r = ld.r[i], q = ld.q[i];
    const double p_in = detail::rule_inclusion_probability(rule, r, q, n, mode);
    if (r > q)
      s.add((r - q) * (1.0 - p_in));
    else
      s.add((q - r) * p_in);
  }
  RegretReport rep;
  rep.regret = 0.5 * s.value();
  rep.rate_bound = regret_rate_bound(ld.q, n);
  rep.ratio = rep.rate_bound > 0.0 ? rep.regret / rep.rate_bound : 0.0;
  rep.method = RegretReport::Method::Exact;
  rep.mc_stderr = 0.0;
  return rep;
}

/// Monte Carlo mean of envelope_regret over sampled counts; trial t uses
/// stream_index = seed.stream_index + t.
inline RegretReport expected_regret_mc(const ThresholdRule& rule, const LabeledDistribution& ld,
                                       std::uint64_t n, std::uint64_t trials, RngSeed seed,
                                       SamplingMode mode = SamplingMode::Multinomial) {
  if (trials == 0) throw std::invalid_argument("expected_regret_mc: trials must be >= 1");
  KahanSum sum, sumsq;
  for (std::uint64_t t = 0; t < trials; ++t) {
    const RngSeed trial_seed{seed.master_seed, seed.stream_index + t};
    const EmpiricalCounts counts = sample_counts(ld.r, n, mode, trial_seed);
    DecisionRegime regime(ld.support_size());
    for (std::size_t i = 0; i < ld.support_size(); ++i)
      regime.members[i] = rule.includes(counts.counts[i], ld.q[i], n);
    const double g = envelope_regret(regime, ld);
    sum.add(g);
    sumsq.add(g * g);
  }
  const double mean = sum.value() / static_cast<double>(trials);
  double se = 0.0;
  if (trials > 1) {
    const double var =
        std::max(0.0, (sumsq.value() - static_cast<double>(trials) * mean * mean) /
                          static_cast<double>(trials - 1));
    se = std::sqrt(var / static_cast<double>(trials));
  }
  RegretReport rep;
  rep.regret = mean;
  rep.rate_bound = regret_rate_bound(ld.q, n);
  rep.ratio = rep.rate_bound > 0.0 ? rep.regret / rep.rate_bound : 0.0;
  rep.method = RegretReport::Method::MonteCarlo;
  rep.mc_stderr = se;
  return rep;
}

// ---------------------------------------------------------------------------
// ERM over labeled pairs (general prior).

/// Majority vote per symbol; ties go to class 0.
inline DecisionRegime erm_classifier(std::span<const std::uint64_t> n0,
                                     std::span<const std::uint64_t> n1) {
  if (n0.size() != n1.size())
    throw std::invalid_argument("erm_classifier: mismatched count vectors");
  DecisionRegime regime(n0.size());
  for (std::size_t i = 0; i < n0.size(); ++i) regime.members[i] = n0[i] >= n1[i];
  return regime;
}

namespace detail {

/// Population excess risk of a fixed regime when the joint law has cell
/// masses p0_x = (1-prior1) r_x, p1_x = prior1 q_x. Termwise nonnegative.
inline double erm_excess_risk(const DecisionRegime& regime, std::span<const double> p0,
                              std::span<const double> p1) {
  KahanSum s;
  for (std::size_t x = 0; x < p0.size(); ++x) {
    const bool assign0 = regime.members[x];
    const double cost = assign0 ? p1[x] : p0[x];
    s.add(cost - std::min(p0[x], p1[x]));
  }
  return s.value();
}

/// P(n1_x > n0_x) for (n0, n1, rest) ~ Multinomial(n; p0, p1, 1-p0-p1),
/// by windowed trinomial enumeration (neglected mass below 1e-12).
inline double erm_assign1_probability(std::uint64_t n, double p0, double p1,
                                      std::span<const double> log_fact) {
  if (p1 <= 0.0) return 0.0;
  if (p0 <= 0.0) return 1.0 - std::exp(static_cast<double>(n) * std::log1p(-p1));
  const double nd = static_cast<double>(n);
  const double lp0 = std::log(p0), lp1 = std::log(p1);
  const double lrest = std::log1p(std::max(-1.0, -p0 - p1));
  auto window = [nd](double p) {
    const double mu = nd * p;
    const double sd = std::sqrt(std::max(mu * (1.0 - p), 1.0));
    return std::pair<std::uint64_t, std::uint64_t>(
        static_cast<std::uint64_t>(std::max(0.0, std::floor(mu - 12.0 * sd - 4.0))),
        static_cast<std::uint64_t>(std::min(nd, std::ceil(mu + 12.0 * sd + 4.0))));
  };
  const auto [lo1, hi1] = window(p1);
  const auto [lo0, hi0] = window(p0);
  KahanSum total;
  for (std::uint64_t j1 = lo1; j1 <= hi1; ++j1) {
    for (std::uint64_t j0 = lo0; j0 <= std::min<std::uint64_t>(hi0, n - j1); ++j0) {
      if (j1 <= j0) continue;
      const std::uint64_t rest = n - j0 - j1;
      const double lp = log_fact[n] - log_fact[j0] - log_fact[j1] - log_fact[rest] +
                        static_cast<double>(j0) * lp0 + static_cast<double>(j1) * lp1 +
                        (rest == 0 ? 0.0 : static_cast<double>(rest) * lrest);
      total.add(std::exp(lp));
    }
  }
  return std::min(total.value(), 1.0);
}

}  // namespace detail

inline constexpr std::uint64_t kMaxExactErmN = 2000;

/// Expected excess risk of the ERM classifier over the Bayes classifier
/// t*(x) = 1[eta(x) >= 1/2], from n labeled pairs. Exact mode enumerates
/// per-symbol trinomials (n <= 2000); Monte Carlo mode samples the joint.
inline RegretReport expected_regret_erm(const LabeledDistribution& ld, std::uint64_t n,
                                        RegretReport::Method mode, std::uint64_t trials = 0,
                                        RngSeed seed = RngSeed{}) {
  const std::size_t S = ld.support_size();
  std::vector<double> p0(S), p1(S);
  for (std::size_t x = 0; x < S; ++x) {
    p0[x] = (1.0 - ld.prior1) * ld.r[x];
    p1[x] = ld.prior1 * ld.q[x];
  }
  RegretReport rep;
  rep.rate_bound = std::sqrt(static_cast<double>(S) / static_cast<double>(n));
  if (mode == RegretReport::Method::Exact) {
    if (n > kMaxExactErmN)
      throw std::invalid_argument("expected_regret_erm: exact mode requires n <= 2000");
    std::vector<double> log_fact(n + 1, 0.0);
    for (std::uint64_t k = 1; k <= n; ++k)
      log_fact[k] = log_fact[k - 1] + std::log(static_cast<double>(k));
    KahanSum s;
    for (std::size_t x = 0; x < S; ++x) {
      const double pa1 = detail::erm_assign1_probability(n, p0[x], p1[x], log_fact);
      // E cost - bayes cost, split by which class is optimal
      if (p0[x] >= p1[x])
        s.add((p0[x] - p1[x]) * pa1);
      else
        s.add((p1[x] - p0[x]) * (1.0 - pa1));
    }
    rep.regret = s.value();
    rep.method = RegretReport::Method::Exact;
    rep.mc_stderr = 0.0;
  } else {
    if (trials == 0) throw std::invalid_argument("expected_regret_erm: trials must be >= 1");
    // flatten the joint into 2S cells: even -> (x, Y=0), odd -> (x, Y=1)
    std::vector<double> joint(2 * S);
    for (std::size_t x = 0; x < S; ++x) {
      joint[2 * x] = p0[x];
      joint[2 * x + 1] = p1[x];
    }
    const FiniteDistribution joint_dist = FiniteDistribution::strict(std::move(joint));
    KahanSum sum, sumsq;
    for (std::uint64_t t = 0; t < trials; ++t) {
      const RngSeed trial_seed{seed.master_seed, seed.stream_index + t};
      const EmpiricalCounts cells =
          sample_counts(joint_dist, n, SamplingMode::Multinomial, trial_seed);
      std::vector<std::uint64_t> n0(S), n1(S);
      for (std::size_t x = 0; x < S; ++x) {
        n0[x] = cells.counts[2 * x];
        n1[x] = cells.counts[2 * x + 1];
      }
      const DecisionRegime regime = erm_classifier(n0, n1);
      const double g = detail::erm_excess_risk(regime, p0, p1);
      sum.add(g);
      sumsq.add(g * g);
    }
    const double mean = sum.value() / static_cast<double>(trials);
    double se = 0.0;
    if (trials > 1) {
      const double var =
          std::max(0.0, (sumsq.value() - static_cast<double>(trials) * mean * mean) /
                            static_cast<double>(trials - 1));
      se = std::sqrt(var / static_cast<double>(trials));
    }
    rep.regret = mean;
    rep.method = RegretReport::Method::MonteCarlo;
    rep.mc_stderr = se;
  }
  rep.ratio = rep.rate_bound > 0.0 ? rep.regret / rep.rate_bound : 0.0;
  return rep;
}

}  // namespace limitest
