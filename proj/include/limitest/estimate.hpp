#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "limitest/classify.hpp"
#include "limitest/dist.hpp"
#include "limitest/envelope.hpp"
#include "limitest/numeric.hpp"
#include "limitest/polyapprox.hpp"
#include "limitest/regime.hpp"

namespace limitest {

struct EstimateReport {
  double estimate = 0.0;
  double truth = std::numeric_limits<double>::quiet_NaN();
  double abs_error = std::numeric_limits<double>::quiet_NaN();
  std::string estimator_id;
  // clamping happens after summation; the raw sum is kept for diagnostics
  double pre_clamp = std::numeric_limits<double>::quiet_NaN();
};

inline EstimateReport with_truth(EstimateReport r, double truth) {
  r.truth = truth;
  r.abs_error = std::abs(r.estimate - truth);
  return r;
}

/// Tuning knobs of the two-regime optimal estimators. Small-count symbols
/// (count <= c1 * ln n) use the unbiased polynomial statistic built from
/// the best approximation on [0, c2 * ln n / n]; large-count symbols use a
/// bias-corrected plug-in term. Defaults were tuned on the preset sweeps.
struct OptimalConfig {
  double c1 = 1.5;
  double c2 = 10.0;
  double degree_scale = 1.0;  // degree = ceil(degree_scale * ln n)
  int max_degree = 64;
  int t_quant_levels = 1024;  // kink positions quantized for the poly cache
  double remez_tol = 1e-3;
  bool sample_split = false;  // thin counts into selection/estimation halves
  RngSeed split_seed{};
};

namespace detail {

// Memoized monomial coefficients of the Remez approximations the
// estimators need. Keyed by (kind, degree, quantized kink); thread-safe.
//   kind 0: -y lg y on [0, 1]
//   kind 1: |y - t| on [0, 1], t = tq / levels
//   kind 2: |u| on [-1, 1]
class PolyCache {
 public:
  static PolyCache& instance() {
    static PolyCache cache;
    return cache;
  }

  std::shared_ptr<const std::vector<double>> get(int kind, int degree, int tq, int levels,
                                                 double tol) {
    const auto key = std::make_tuple(kind, degree, tq, levels);
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (auto it = map_.find(key); it != map_.end()) return it->second;
    }
    auto coeffs = std::make_shared<const std::vector<double>>(build(kind, degree, tq, levels, tol));
    std::lock_guard<std::mutex> lock(mu_);
    auto [it, inserted] = map_.emplace(key, std::move(coeffs));
    return it->second;
  }

 private:
  static std::vector<double> build(int kind, int degree, int tq, int levels, double tol) {
    RemezOptions opts;
    opts.tol = tol;
    PolyApprox p;
    switch (kind) {
      case 0:
        p = remez_best_approx([](double y) { return y > 0.0 ? -y * std::log2(y) : 0.0; }, 0.0,
                              1.0, degree, opts);
        break;
      case 1: {
        const double t = static_cast<double>(tq) / static_cast<double>(levels);
        p = remez_best_approx([t](double y) { return std::abs(y - t); }, 0.0, 1.0, degree, opts);
        break;
      }
      case 2:
        p = remez_best_approx([](double u) { return std::abs(u); }, -1.0, 1.0, degree, opts);
        break;
      default:
        throw std::logic_error("PolyCache: unknown kind");
    }
    return monomial_coefficients(p);
  }

  std::mutex mu_;
  std::map<std::tuple<int, int, int, int>, std::shared_ptr<const std::vector<double>>> map_;
};

/// Scaled unbiased falling-factorial moments: moments[k] estimates
/// (p / delta)^k without bias, where p is the symbol probability.
/// Multinomial counts use E[(X)_k] = (n)_k p^k; Poissonized use
/// E[(X)_k] = (n p)^k. Factors stay bounded by count/(n*delta), so the
/// polynomial sum is well conditioned when c1 < c2.
inline void scaled_moments(std::uint64_t count, std::uint64_t n, SamplingMode mode, double delta,
                           std::span<double> moments) {
  moments[0] = 1.0;
  const double xd = static_cast<double>(count);
  const double nd = static_cast<double>(n);
  double acc = 1.0;
  for (std::size_t k = 1; k < moments.size(); ++k) {
    const double num = xd - static_cast<double>(k - 1);
    if (num <= 0.0) {
      for (std::size_t j = k; j < moments.size(); ++j) moments[j] = 0.0;
      return;
    }
    const double den =
        (mode == SamplingMode::Multinomial) ? (nd - static_cast<double>(k - 1)) * delta : nd * delta;
    acc *= num / den;
    moments[k] = acc;
  }
}

inline int poly_degree(double log_n, const OptimalConfig& cfg) {
  const int k = static_cast<int>(std::ceil(cfg.degree_scale * log_n));
  // the floor keeps the zero-count value of the polynomial statistic small
  // even at the smallest sample sizes
  return std::clamp(k, 8, cfg.max_degree);
}

inline int quantize_kink(double t, int levels) {
  return std::clamp(static_cast<int>(std::lround(t * levels)), 0, levels);
}

/// Exact Binomial(x, 1/2) via popcounts; used by the sample-split option.
inline std::uint64_t binomial_half(RandomStream& rng, std::uint64_t x) {
  std::uint64_t r = 0;
  while (x >= 64) {
    r += static_cast<std::uint64_t>(std::popcount(rng.next_u64()));
    x -= 64;
  }
  if (x > 0) r += static_cast<std::uint64_t>(std::popcount(rng.next_u64() & ((1ULL << x) - 1ULL)));
  return r;
}

struct SplitCounts {
  std::vector<std::uint64_t> select;  // drives the small/large branch
  std::vector<std::uint64_t> estimate;
  std::uint64_t n_select = 0;
  std::uint64_t n_estimate = 0;
};

inline SplitCounts split_or_passthrough(const EmpiricalCounts& counts, const OptimalConfig& cfg) {
  SplitCounts out;
  if (!cfg.sample_split) {
    out.select = counts.counts;
    out.estimate = counts.counts;
    out.n_select = counts.nominal_n;
    out.n_estimate = counts.nominal_n;
    return out;
  }
  RandomStream rng(cfg.split_seed);
  out.select.resize(counts.counts.size());
  out.estimate.resize(counts.counts.size());
  for (std::size_t i = 0; i < counts.counts.size(); ++i) {
    const std::uint64_t half = binomial_half(rng, counts.counts[i]);
    out.select[i] = half;
    out.estimate[i] = counts.counts[i] - half;
  }
  out.n_select = counts.nominal_n / 2;
  out.n_estimate = counts.nominal_n - counts.nominal_n / 2;
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Plug-in route.

inline EstimateReport plugin_bayes_error(const EmpiricalCounts& counts,
                                         const FiniteDistribution& q) {
  if (counts.mode != SamplingMode::Multinomial)
    throw std::invalid_argument("plugin_bayes_error: multinomial counts required");
  const LabeledDistribution ld(empirical_distribution(counts), q, 0.5);
  EstimateReport rep;
  rep.estimate = bayes_error(ld);
  rep.pre_clamp = rep.estimate;
  rep.estimator_id = "plugin_bayes_error";
  return rep;
}

inline EstimateReport plugin_entropy(const EmpiricalCounts& counts) {
  const std::uint64_t total = counts.total();
  if (total == 0) throw DegenerateSampleError("plugin_entropy: no observations");
  std::vector<double> p(counts.counts.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    p[i] = static_cast<double>(counts.counts[i]) / static_cast<double>(total);
  EstimateReport rep;
  rep.estimate = shannon_entropy(FiniteDistribution::strict(std::move(p)));
  rep.pre_clamp = rep.estimate;
  rep.estimator_id = "plugin_entropy";
  return rep;
}

// ---------------------------------------------------------------------------
// Optimal (polynomial-approximation) route.

/// Estimate of L1(r, q) for known q from counts on r. Small-count symbols
/// apply the unbiased polynomial statistic of |x - q_i| on [0, c2 ln n / n];
/// when q_i lies beyond that interval the restriction is linear and the
/// exact unbiased term q_i - X/n is used. Large-count symbols use
/// |X/n - q_i| minus the Gaussian kink bias sigma * psi(diff / sigma).
inline EstimateReport optimal_l1_estimator(const EmpiricalCounts& counts,
                                           const FiniteDistribution& q,
                                           const OptimalConfig& cfg = OptimalConfig{}) {
  if (counts.counts.size() != q.support_size())
    throw std::invalid_argument("optimal_l1_estimator: mismatched support sizes");
  if (counts.nominal_n < 4)
    throw std::invalid_argument("optimal_l1_estimator: requires n >= 4");
  const auto split = detail::split_or_passthrough(counts, cfg);
  const double log_n = std::log(static_cast<double>(split.n_select));
  const double threshold = cfg.c1 * log_n;
  const double delta =
      std::min(1.0, cfg.c2 * log_n / static_cast<double>(split.n_estimate));
  const int degree = detail::poly_degree(log_n, cfg);
  std::vector<double> moments(static_cast<std::size_t>(degree) + 1);

  KahanSum sum;
  for (std::size_t i = 0; i < q.support_size(); ++i) {
    const std::uint64_t sel = split.select[i];
    const std::uint64_t est = split.estimate[i];
    const std::uint64_t n_est = split.n_estimate;
    const double phat = static_cast<double>(est) / static_cast<double>(n_est);
    if (static_cast<double>(sel) <= threshold) {
      const double t = q[i] / delta;
      if (t <= 1.0) {
        const auto coeffs = detail::PolyCache::instance().get(
            1, degree, detail::quantize_kink(t, cfg.t_quant_levels), cfg.t_quant_levels,
            cfg.remez_tol);
        detail::scaled_moments(est, n_est, counts.mode, delta, moments);
        KahanSum term;
        for (std::size_t k = 0; k < coeffs->size(); ++k) term.add((*coeffs)[k] * moments[k]);
        sum.add(delta * term.value());
      } else {
        sum.add(q[i] - phat);
      }
    } else {
      const double var = (counts.mode == SamplingMode::Multinomial)
                             ? phat * (1.0 - phat) / static_cast<double>(n_est)
                             : phat / static_cast<double>(n_est);
      const double sigma = std::sqrt(std::max(var, 0.0));
      const double diff = phat - q[i];
      const double corr = sigma > 0.0 ? sigma * gauss_abs_bias(diff / sigma) : 0.0;
      sum.add(std::abs(diff) - corr);
    }
  }
  EstimateReport rep;
  rep.pre_clamp = sum.value();
  rep.estimate = std::clamp(rep.pre_clamp, 0.0, 2.0);
  rep.estimator_id = "optimal_l1";
  return rep;
}

inline EstimateReport optimal_bayes_error(const EmpiricalCounts& counts,
                                          const FiniteDistribution& q,
                                          const OptimalConfig& cfg = OptimalConfig{}) {
  const EstimateReport l1 = optimal_l1_estimator(counts, q, cfg);
  EstimateReport rep;
  rep.pre_clamp = 0.5 - 0.25 * l1.pre_clamp;
  rep.estimate = std::clamp(0.5 - 0.25 * l1.estimate, 0.0, 0.5);
  rep.estimator_id = "optimal_bayes_error";
  return rep;
}

/// Entropy counterpart: small-count symbols use the polynomial statistic of
/// -x lg x (the lg delta cross term is estimated exactly by X/n), large
/// ones get the plug-in term plus the first-order lg(e)(1 - p^)/(2n)
/// correction, which aggregates to the classical (S-1) lg(e)/(2n).
inline EstimateReport optimal_entropy_estimator(const EmpiricalCounts& counts,
                                                const OptimalConfig& cfg = OptimalConfig{}) {
  if (counts.nominal_n < 4)
    throw std::invalid_argument("optimal_entropy_estimator: requires n >= 4");
  const auto split = detail::split_or_passthrough(counts, cfg);
  const double log_n = std::log(static_cast<double>(split.n_select));
  const double threshold = cfg.c1 * log_n;
  const double delta =
      std::min(1.0, cfg.c2 * log_n / static_cast<double>(split.n_estimate));
  const int degree = detail::poly_degree(log_n, cfg);
  const auto coeffs =
      detail::PolyCache::instance().get(0, degree, 0, cfg.t_quant_levels, cfg.remez_tol);
  std::vector<double> moments(static_cast<std::size_t>(degree) + 1);
  const double neg_lg_delta = -std::log2(delta);

  KahanSum sum;
  for (std::size_t i = 0; i < counts.counts.size(); ++i) {
    const std::uint64_t sel = split.select[i];
    const std::uint64_t est = split.estimate[i];
    const std::uint64_t n_est = split.n_estimate;
    const double phat = static_cast<double>(est) / static_cast<double>(n_est);
    if (static_cast<double>(sel) <= threshold) {
      detail::scaled_moments(est, n_est, counts.mode, delta, moments);
      KahanSum term;
      for (std::size_t k = 0; k < coeffs->size(); ++k) term.add((*coeffs)[k] * moments[k]);
      sum.add(delta * term.value() + neg_lg_delta * phat);
    } else {
      sum.add(-xlg(phat) + kLgE * (1.0 - phat) / (2.0 * static_cast<double>(n_est)));
    }
  }
  EstimateReport rep;
  rep.pre_clamp = sum.value();
  rep.estimate =
      std::clamp(rep.pre_clamp, 0.0, std::log2(static_cast<double>(counts.counts.size())));
  rep.estimator_id = "optimal_entropy";
  return rep;
}

// ---------------------------------------------------------------------------
// Compression route (sequential probability assignment).

/// Add-beta mixture predictor: after observing t symbols the predictive
/// probability of x is (count_x + beta) / (t + S * beta).
class SequentialPredictor {
 public:
  SequentialPredictor(std::size_t support_size, double beta)
      : counts_(support_size, 0), beta_(beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("SequentialPredictor: beta must be > 0");
    if (support_size == 0) throw std::invalid_argument("SequentialPredictor: empty alphabet");
  }

  double predictive(std::uint32_t x) const {
    return (static_cast<double>(counts_.at(x)) + beta_) /
           (static_cast<double>(seen_) + beta_ * static_cast<double>(counts_.size()));
  }

  void observe(std::uint32_t x) {
    counts_.at(x) += 1;
    ++seen_;
  }

  double beta() const noexcept { return beta_; }
  std::uint64_t seen() const noexcept { return seen_; }

 private:
  std::vector<std::uint64_t> counts_;
  double beta_;
  std::uint64_t seen_ = 0;
};

/// Stateless form of the predictive probability given explicit history counts.
inline double sequential_predictive(std::span<const std::uint64_t> history_counts,
                                    std::uint64_t history_total, double beta, std::uint32_t x) {
  if (!(beta > 0.0)) throw std::invalid_argument("sequential_predictive: beta must be > 0");
  return (static_cast<double>(history_counts[x]) + beta) /
         (static_cast<double>(history_total) + beta * static_cast<double>(history_counts.size()));
}

/// (1/n) sum_i lg(1 / Q(x_i | x^{i-1})) for the add-beta coding
/// distribution. Pathwise at least the plug-in entropy of the same
/// sequence, because the mixture likelihood cannot beat the maximized
/// product likelihood.
inline EstimateReport compression_entropy_estimator(std::span<const std::uint32_t> sequence,
                                                    std::size_t support_size, double beta = 0.5) {
  if (sequence.empty())
    throw std::invalid_argument("compression_entropy_estimator: empty sequence");
  SequentialPredictor pred(support_size, beta);
  KahanSum bits;
  for (const std::uint32_t x : sequence) {
    bits.add(-std::log2(pred.predictive(x)));
    pred.observe(x);
  }
  EstimateReport rep;
  rep.estimate = bits.value() / static_cast<double>(sequence.size());
  rep.pre_clamp = rep.estimate;
  rep.estimator_id = "compression_entropy";
  return rep;
}

/// The logarithmic-loss achiever: P^(i) = (count_i + beta) / (total + S beta).
inline FiniteDistribution predictive_distribution(const EmpiricalCounts& counts, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("predictive_distribution: beta must be > 0");
  const double total = static_cast<double>(counts.total());
  const double denom = total + beta * static_cast<double>(counts.counts.size());
  std::vector<double> p(counts.counts.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    p[i] = (static_cast<double>(counts.counts[i]) + beta) / denom;
  return FiniteDistribution::strict(std::move(p));
}

// ---------------------------------------------------------------------------
// Two-sample route (both P and Q unknown).

inline EstimateReport two_sample_plugin_l1(const EmpiricalCounts& counts_r,
                                           const EmpiricalCounts& counts_q) {
  if (counts_r.mode != SamplingMode::Multinomial || counts_q.mode != SamplingMode::Multinomial)
    throw std::invalid_argument("two_sample_plugin_l1: multinomial counts required");
  EstimateReport rep;
  rep.estimate =
      l1_distance(empirical_distribution(counts_r), empirical_distribution(counts_q));
  rep.pre_clamp = rep.estimate;
  rep.estimator_id = "two_sample_plugin_l1";
  return rep;
}

/// Empirical Scheffe set {i : rhat_i > qhat_i}, via exact integer cross
/// multiplication.
inline DecisionRegime two_sample_regime(const EmpiricalCounts& counts_r,
                                        const EmpiricalCounts& counts_q) {
  if (counts_r.counts.size() != counts_q.counts.size())
    throw std::invalid_argument("two_sample_regime: mismatched support sizes");
  DecisionRegime regime(counts_r.counts.size());
  for (std::size_t i = 0; i < regime.support_size(); ++i)
    regime.members[i] =
        counts_r.counts[i] * counts_q.nominal_n > counts_q.counts[i] * counts_r.nominal_n;
  return regime;
}

/// Two-sample analogue of the optimal L1 estimator: symbols small in both
/// samples use the best approximation of |u| on [-1, 1] applied to the
/// centered variable (r - q)/delta, whose powers are estimated without bias
/// by products of falling-factorial moments from the two independent
/// samples. Symbols large in either sample use the corrected plug-in term.
inline EstimateReport two_sample_optimal_l1(const EmpiricalCounts& counts_r,
                                            const EmpiricalCounts& counts_q,
                                            const OptimalConfig& cfg = OptimalConfig{}) {
  if (counts_r.counts.size() != counts_q.counts.size())
    throw std::invalid_argument("two_sample_optimal_l1: mismatched support sizes");
  const std::uint64_t n = counts_r.nominal_n, m = counts_q.nominal_n;
  if (n < 4 || m < 4) throw std::invalid_argument("two_sample_optimal_l1: requires n, m >= 4");
  const double log_n = std::log(static_cast<double>(n)), log_m = std::log(static_cast<double>(m));
  const double thr_n = cfg.c1 * log_n, thr_m = cfg.c1 * log_m;
  const double delta = std::min(
      1.0, std::max(cfg.c2 * log_n / static_cast<double>(n), cfg.c2 * log_m / static_cast<double>(m)));
  int degree = detail::poly_degree(std::min(log_n, log_m), cfg);
  if (degree % 2 != 0) ++degree;  // |u| is even
  const auto coeffs =
      detail::PolyCache::instance().get(2, degree, 0, cfg.t_quant_levels, cfg.remez_tol);

  // Pascal rows for the centered-power expansion.
  std::vector<std::vector<double>> choose(static_cast<std::size_t>(degree) + 1);
  for (std::size_t k = 0; k < choose.size(); ++k) {
    choose[k].resize(k + 1);
    choose[k][0] = choose[k][k] = 1.0;
    for (std::size_t j = 1; j < k; ++j) choose[k][j] = choose[k - 1][j - 1] + choose[k - 1][j];
  }

  std::vector<double> ma(static_cast<std::size_t>(degree) + 1),
      mb(static_cast<std::size_t>(degree) + 1);
  KahanSum sum;
  for (std::size_t i = 0; i < counts_r.counts.size(); ++i) {
    const std::uint64_t x = counts_r.counts[i], y = counts_q.counts[i];
    const double rhat = static_cast<double>(x) / static_cast<double>(n);
    const double qhat = static_cast<double>(y) / static_cast<double>(m);
    if (static_cast<double>(x) <= thr_n && static_cast<double>(y) <= thr_m) {
      detail::scaled_moments(x, n, counts_r.mode, delta, ma);
      detail::scaled_moments(y, m, counts_q.mode, delta, mb);
      KahanSum term;
      for (std::size_t k = 0; k < coeffs->size(); ++k) {
        if ((*coeffs)[k] == 0.0) continue;
        KahanSum vk;
        for (std::size_t j = 0; j <= k; ++j) {
          const double sign = ((k - j) % 2 == 0) ? 1.0 : -1.0;
          vk.add(sign * choose[k][j] * ma[j] * mb[k - j]);
        }
        term.add((*coeffs)[k] * vk.value());
      }
      sum.add(delta * term.value());
    } else {
      const double var = rhat * (1.0 - rhat) / static_cast<double>(n) +
                         qhat * (1.0 - qhat) / static_cast<double>(m);
      const double sigma = std::sqrt(std::max(var, 0.0));
      const double diff = rhat - qhat;
      const double corr = sigma > 0.0 ? sigma * gauss_abs_bias(diff / sigma) : 0.0;
      sum.add(std::abs(diff) - corr);
    }
  }
  EstimateReport rep;
  rep.pre_clamp = sum.value();
  rep.estimate = std::clamp(rep.pre_clamp, 0.0, 2.0);
  rep.estimator_id = "two_sample_optimal_l1";
  return rep;
}

inline EstimateReport two_sample_plugin_bayes_error(const EmpiricalCounts& counts_r,
                                                    const EmpiricalCounts& counts_q) {
  const EstimateReport l1 = two_sample_plugin_l1(counts_r, counts_q);
  EstimateReport rep;
  rep.pre_clamp = 0.5 - 0.25 * l1.pre_clamp;
  rep.estimate = std::clamp(rep.pre_clamp, 0.0, 0.5);
  rep.estimator_id = "two_sample_plugin_bayes_error";
  return rep;
}

inline EstimateReport two_sample_optimal_bayes_error(const EmpiricalCounts& counts_r,
                                                     const EmpiricalCounts& counts_q,
                                                     const OptimalConfig& cfg = OptimalConfig{}) {
  const EstimateReport l1 = two_sample_optimal_l1(counts_r, counts_q, cfg);
  EstimateReport rep;
  rep.pre_clamp = 0.5 - 0.25 * l1.pre_clamp;
  rep.estimate = std::clamp(0.5 - 0.25 * l1.estimate, 0.0, 0.5);
  rep.estimator_id = "two_sample_optimal_bayes_error";
  return rep;
}

}  // namespace limitest
