#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "limitest/numeric.hpp"

namespace limitest {

// Exact probability kernels for Binomial(n, p) and Poisson(lambda).
// Point masses use the saddle-point form (Loader): the Stirling error
// stirlerr(.) and the scaled deviance bd0(.,.) are evaluated with
// cancellation-free series, which keeps the relative error near 1e-14
// up to n = 1e6. CDFs sum the smaller tail with the pmf ratio
// recurrence, so absolute error stays well below 1e-12.

namespace detail {

inline constexpr double kMaxCdfScale = 1e8;  // overflow-regime guard

// log(k!) - log(sqrt(2*pi*k) * (k/e)^k); exact via lgamma below 16,
// asymptotic series above.
inline double stirlerr(double k) {
  if (k < 16.0) {
    return std::lgamma(k + 1.0) - (k + 0.5) * std::log(k) + k -
           0.9189385332046727418;  // 0.5*log(2*pi)
  }
  const double z = 1.0 / (k * k);
  return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - (1.0 / 1680.0 - z / 1188.0) * z) * z) * z) / k;
}

// x*log(x/np) + np - x, evaluated by series when x is near np.
inline double bd0(double x, double np) {
  if (!std::isfinite(x) || !std::isfinite(np) || np <= 0.0)
    throw std::invalid_argument("bd0: invalid arguments");
  if (std::abs(x - np) < 0.1 * (x + np)) {
    const double v = (x - np) / (x + np);
    double s = (x - np) * v;
    double ej = 2.0 * x * v;
    const double v2 = v * v;
    for (int j = 1; j < 1000; ++j) {
      ej *= v2;
      const double s1 = s + ej / (2 * j + 1);
      if (s1 == s) return s1;
      s = s1;
    }
    return s;  // unreachable for |v| < 1
  }
  return x * std::log(x / np) + np - x;
}

inline double binom_pmf(std::uint64_t n, double p, std::uint64_t k) {
  if (p == 0.0) return k == 0 ? 1.0 : 0.0;
  if (p == 1.0) return k == n ? 1.0 : 0.0;
  if (k > n) return 0.0;
  const double nd = static_cast<double>(n), kd = static_cast<double>(k);
  if (k == 0) return std::exp(nd * std::log1p(-p));
  if (k == n) return std::exp(nd * std::log(p));
  const double lc = stirlerr(nd) - stirlerr(kd) - stirlerr(nd - kd) -
                    bd0(kd, nd * p) - bd0(nd - kd, nd * (1.0 - p));
  const double lf = std::log(6.283185307179586477) + std::log(kd) + std::log1p(-kd / nd);
  return std::exp(lc - 0.5 * lf);
}

inline double poisson_pmf(double lambda, std::uint64_t k) {
  if (lambda == 0.0) return k == 0 ? 1.0 : 0.0;
  if (k == 0) return std::exp(-lambda);
  const double kd = static_cast<double>(k);
  const double lc = -stirlerr(kd) - bd0(kd, lambda);
  return std::exp(lc - 0.5 * std::log(6.283185307179586477 * kd));
}

}  // namespace detail

/// P(X <= k) for X ~ Binomial(n, p). Absolute error < 1e-12 for n <= 1e6.
inline double binomial_cdf(std::uint64_t n, double p, std::int64_t k) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("binomial_cdf: p must be in [0,1]");
  if (static_cast<double>(n) > detail::kMaxCdfScale)
    throw std::invalid_argument("binomial_cdf: n too large for exact evaluation");
  if (k < 0) return 0.0;
  const std::uint64_t ku = static_cast<std::uint64_t>(k);
  if (ku >= n) return 1.0;
  if (p == 0.0) return 1.0;
  if (p == 1.0) return 0.0;  // ku < n here
  const double mean = static_cast<double>(n) * p;
  const double q1 = 1.0 - p;
  if (static_cast<double>(ku) <= mean) {
    // lower tail, terms shrink going down from k
    double term = detail::binom_pmf(n, p, ku);
    KahanSum s;
    s.add(term);
    for (std::uint64_t j = ku; j > 0; --j) {
      term *= (static_cast<double>(j) * q1) / ((static_cast<double>(n - j) + 1.0) * p);
      s.add(term);
      if (term < 1e-18 * (s.value() + 1e-300)) break;
    }
    return s.value();
  }
  // upper tail from k+1, terms shrink going up
  double term = detail::binom_pmf(n, p, ku + 1);
  KahanSum s;
  s.add(term);
  for (std::uint64_t j = ku + 1; j < n; ++j) {
    term *= ((static_cast<double>(n - j)) * p) / ((static_cast<double>(j) + 1.0) * q1);
    s.add(term);
    if (term < 1e-18 * (s.value() + 1e-300)) break;
  }
  return 1.0 - s.value();
}

/// P(X <= k) for X ~ Poisson(lambda). Same accuracy contract as above.
inline double poisson_cdf(double lambda, std::int64_t k) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("poisson_cdf: lambda must be >= 0");
  if (lambda > detail::kMaxCdfScale)
    throw std::invalid_argument("poisson_cdf: lambda too large for exact evaluation");
  if (k < 0) return 0.0;
  if (lambda == 0.0) return 1.0;
  const std::uint64_t ku = static_cast<std::uint64_t>(k);
  if (static_cast<double>(ku) <= lambda) {
    double term = detail::poisson_pmf(lambda, ku);
    KahanSum s;
    s.add(term);
    for (std::uint64_t j = ku; j > 0; --j) {
      term *= static_cast<double>(j) / lambda;
      s.add(term);
      if (term < 1e-18 * (s.value() + 1e-300)) break;
    }
    return s.value();
  }
  double term = detail::poisson_pmf(lambda, ku + 1);
  KahanSum s;
  s.add(term);
  for (std::uint64_t j = ku + 1;; ++j) {
    term *= lambda / (static_cast<double>(j) + 1.0);
    s.add(term);
    if (term < 1e-18 * (s.value() + 1e-300)) break;
  }
  return 1.0 - s.value();
}

/// P(X >= t) for real t under the integer law selected by `poisson`.
inline double upper_tail_at_least(bool poisson, double lambda_or_np, std::uint64_t n,
                                  double p, double t) {
  const std::int64_t k = static_cast<std::int64_t>(std::ceil(t)) - 1;
  return poisson ? 1.0 - poisson_cdf(lambda_or_np, k) : 1.0 - binomial_cdf(n, p, k);
}

/// P(X <= t) for real t.
inline double lower_tail_at_most(bool poisson, double lambda_or_np, std::uint64_t n,
                                 double p, double t) {
  const std::int64_t k = static_cast<std::int64_t>(std::floor(t));
  return poisson ? poisson_cdf(lambda_or_np, k) : binomial_cdf(n, p, k);
}

}  // namespace limitest
