#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace limitest {

inline constexpr double kLgE = 1.4426950408889634074;  // log2(e)

/// Compensated (Kahan) accumulator; used by all functionals so that
/// tolerance budgets hold at support sizes >= 1e3.
class KahanSum {
 public:
  void add(double x) noexcept {
    const double y = x - comp_;
    const double t = sum_ + y;
    comp_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const noexcept { return sum_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// x * log2(x) with the 0 * lg(0) := 0 convention.
inline double xlg(double x) noexcept { return x > 0.0 ? x * std::log2(x) : 0.0; }

/// Threshold for "count/n > q" comparisons. Returns the real threshold
/// n*q snapped to the nearest integer when it is within 1e-9 of one, so
/// that q values intended as exact multiples of 1/n behave exactly.
inline double count_threshold(double q, std::uint64_t n) noexcept {
  const double t = static_cast<double>(n) * q;
  const double r = std::nearbyint(t);
  if (std::abs(t - r) <= 1e-9 * std::max(1.0, std::abs(t))) return r;
  return t;
}

inline bool count_exceeds(std::uint64_t count, double q, std::uint64_t n) noexcept {
  return static_cast<double>(count) > count_threshold(q, n);
}

/// Strict "q < 1/n" with the same snapping rule: q == 1/n is false.
inline bool q_below_reciprocal(double q, std::uint64_t n) noexcept {
  const double u = q * static_cast<double>(n);
  if (std::abs(u - 1.0) <= 1e-9) return false;
  return u < 1.0;
}

inline double std_normal_pdf(double z) noexcept {
  return 0.3989422804014326779 * std::exp(-0.5 * z * z);
}

inline double std_normal_cdf(double z) noexcept {
  return 0.5 * std::erfc(-z * 0.7071067811865475244);
}

/// E|N(mu,sigma^2)| = |mu| + sigma * gauss_abs_bias(mu/sigma).
/// Nonnegative, maximal at z = 0 (value sqrt(2/pi)), decays like phi(z)/z^2.
inline double gauss_abs_bias(double z) noexcept {
  const double a = std::abs(z);
  return 2.0 * (std_normal_pdf(a) - a * std_normal_cdf(-a));
}

}  // namespace limitest
