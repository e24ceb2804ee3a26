#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "limitest/dist.hpp"
#include "limitest/numeric.hpp"
#include "limitest/regime.hpp"

namespace limitest {

/// Thrown by kl_divergence when p puts mass where q has none; infinities
/// are never returned as numbers.
struct InfiniteDivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Binary-classification source: r is the class-0 conditional, q the
/// class-1 conditional, prior1 = P(Y = 1). The balanced family fixes
/// prior1 = 1/2 exactly.
struct LabeledDistribution {
  FiniteDistribution r;
  FiniteDistribution q;
  double prior1 = 0.5;

  LabeledDistribution(FiniteDistribution r_, FiniteDistribution q_, double prior1_)
      : r(std::move(r_)), q(std::move(q_)), prior1(prior1_) {
    if (r.support_size() != q.support_size())
      throw std::invalid_argument("LabeledDistribution: r and q must share support size");
    if (r.is_relaxed() || q.is_relaxed())
      throw std::invalid_argument("LabeledDistribution: strict distributions required");
    if (!(prior1 >= 0.0 && prior1 <= 1.0))
      throw std::invalid_argument("LabeledDistribution: prior1 must be in [0,1]");
  }

  std::size_t support_size() const noexcept { return r.support_size(); }
  bool balanced() const noexcept { return prior1 == 0.5; }
};

/// Shannon entropy in bits; result lies in [0, lg S].
inline double shannon_entropy(const FiniteDistribution& p) {
  if (p.is_relaxed())
    throw std::invalid_argument("shannon_entropy: relaxed distributions rejected");
  KahanSum h;
  for (std::size_t i = 0; i < p.support_size(); ++i) h.add(-xlg(p[i]));
  return h.value();
}

inline double l1_distance(const FiniteDistribution& p, const FiniteDistribution& q) {
  if (p.support_size() != q.support_size())
    throw std::invalid_argument("l1_distance: mismatched support sizes");
  KahanSum s;
  for (std::size_t i = 0; i < p.support_size(); ++i) s.add(std::abs(p[i] - q[i]));
  return s.value();
}

/// Bayes classification error. For the balanced family this is
/// 1/2 - L1(r, q)/4; for general priors it is sum_x min(prior1*q, (1-prior1)*r).
inline double bayes_error(const LabeledDistribution& ld) {
  if (ld.balanced()) return 0.5 - 0.25 * l1_distance(ld.r, ld.q);
  KahanSum s;
  for (std::size_t i = 0; i < ld.support_size(); ++i)
    s.add(std::min(ld.prior1 * ld.q[i], (1.0 - ld.prior1) * ld.r[i]));
  return s.value();
}

/// KL divergence in bits. Requires support(p) within support(q).
inline double kl_divergence(const FiniteDistribution& p, const FiniteDistribution& q) {
  if (p.support_size() != q.support_size())
    throw std::invalid_argument("kl_divergence: mismatched support sizes");
  if (p.is_relaxed() || q.is_relaxed())
    throw std::invalid_argument("kl_divergence: relaxed distributions rejected");
  KahanSum s;
  for (std::size_t i = 0; i < p.support_size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0)
      throw InfiniteDivergenceError("kl_divergence: p has mass where q is zero");
    s.add(p[i] * std::log2(p[i] / q[i]));
  }
  return std::max(s.value(), 0.0);
}

/// Minimax-redundancy bound pair for alphabets S = alpha * n, in bits per
/// symbol: lower = (alpha/2) lg(e / (2 pi alpha)), upper = lg B_alpha with
/// C_alpha = 1/2 + (1/2) sqrt(1 + 4/alpha) and
/// B_alpha = alpha * C_alpha^(alpha+2) * exp(-1/C_alpha).
struct RedundancyBounds {
  double alpha = 0.0;
  double lower_bits = 0.0;
  double upper_bits = 0.0;
  double c_alpha = 0.0;
  double b_alpha = 0.0;
};

inline constexpr double kRedundancyAlphaMax = 0.43262798971613253;  // e / (2 pi)

inline RedundancyBounds redundancy_bounds(double alpha) {
  if (!(alpha > 0.0 && alpha < kRedundancyAlphaMax))
    throw std::invalid_argument("redundancy_bounds: alpha must lie in (0, e/(2*pi))");
  RedundancyBounds b;
  b.alpha = alpha;
  b.c_alpha = 0.5 + 0.5 * std::sqrt(1.0 + 4.0 / alpha);
  b.b_alpha = alpha * std::pow(b.c_alpha, alpha + 2.0) * std::exp(-1.0 / b.c_alpha);
  b.lower_bits = 0.5 * alpha * std::log2(std::exp(1.0) / (6.283185307179586477 * alpha));
  b.upper_bits = std::log2(b.b_alpha);
  return b;
}

/// Exact excess risk of the classifier t(x) = 1[x not in regime] over the
/// Bayes classifier, for the balanced family. Accumulated termwise as
/// (1/2) sum (r_i - q_i)(1[i in A] - 1[i in regime]) with A the Scheffe set,
/// so every term is nonnegative and the result cannot round below zero.
inline double envelope_regret(const DecisionRegime& regime, const LabeledDistribution& ld) {
  if (!ld.balanced())
    throw std::invalid_argument("envelope_regret: requires prior1 = 1/2");
  if (regime.support_size() != ld.support_size())
    throw std::invalid_argument("envelope_regret: regime over the wrong alphabet");
  KahanSum s;
  for (std::size_t i = 0; i < ld.support_size(); ++i) {
    const double d = ld.r[i] - ld.q[i];
    const bool in_bayes = d > 0.0;
    const bool in_regime = regime.members[i];
    if (in_bayes && !in_regime) s.add(d);
    if (!in_bayes && in_regime) s.add(-d);
  }
  return 0.5 * s.value();
}

}  // namespace limitest
