#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace limitest {

enum class PolyBasis { Chebyshev, Monomial };

/// Polynomial approximation of a scalar function on [a, b]. Constructors
/// work in the Chebyshev basis of the mapped variable
/// xi = (2x - a - b)/(b - a) for conditioning; the monomial form exists
/// for export. sup_error is the measured maximum of |f - p| over a
/// uniform 10^4-point grid of [a, b].
struct PolyApprox {
  std::vector<double> coeffs;  // size degree + 1
  double a = 0.0;
  double b = 1.0;
  int degree = 0;
  double sup_error = 0.0;
  PolyBasis basis = PolyBasis::Chebyshev;

  bool contains(double x) const noexcept { return x >= a && x <= b; }
};

struct RemezOptions {
  double tol = 1e-3;        // relative levelling tolerance
  int max_iterations = 100;
  int grid_size = 4096;     // dense grid used by the exchange step
};

/// Non-convergence carries the best iterate found so far.
struct RemezConvergenceError : std::runtime_error {
  PolyApprox best;
  RemezConvergenceError(std::string msg, PolyApprox best_)
      : std::runtime_error(std::move(msg)), best(std::move(best_)) {}
};

/// Clenshaw evaluation in the Chebyshev basis, Horner in the monomial one.
/// Out-of-interval x extrapolates; callers that care should check
/// contains(x).
inline double eval_poly(const PolyApprox& p, double x) {
  if (p.basis == PolyBasis::Monomial) {
    double acc = 0.0;
    for (std::size_t k = p.coeffs.size(); k-- > 0;) acc = acc * x + p.coeffs[k];
    return acc;
  }
  const double xi = (2.0 * x - p.a - p.b) / (p.b - p.a);
  double b1 = 0.0, b2 = 0.0;
  for (int k = p.degree; k >= 1; --k) {
    const double t = 2.0 * xi * b1 - b2 + p.coeffs[static_cast<std::size_t>(k)];
    b2 = b1;
    b1 = t;
  }
  return xi * b1 - b2 + p.coeffs[0];
}

namespace detail {

inline constexpr int kSupErrorGrid = 10000;

inline double measured_sup_error(const std::function<double(double)>& f, const PolyApprox& p) {
  double m = 0.0;
  for (int i = 0; i <= kSupErrorGrid; ++i) {
    const double x = p.a + (p.b - p.a) * static_cast<double>(i) / kSupErrorGrid;
    const double fx = f(x);
    if (!std::isfinite(fx))
      throw std::invalid_argument("polyapprox: non-finite function value on the grid");
    m = std::max(m, std::abs(fx - eval_poly(p, x)));
  }
  return m;
}

// Solve the dense linear system by Gaussian elimination with partial
// pivoting; sizes here are at most degree + 2 <= 66.
inline std::vector<double> solve_dense(std::vector<std::vector<double>> m,
                                       std::vector<double> rhs) {
  const std::size_t n = rhs.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    if (m[piv][col] == 0.0) throw std::runtime_error("polyapprox: singular exchange system");
    std::swap(m[piv], m[col]);
    std::swap(rhs[piv], rhs[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double factor = m[r][col] / m[col][col];
      if (factor == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) m[r][c] -= factor * m[col][c];
      rhs[r] -= factor * rhs[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = rhs[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= m[i][c] * x[c];
    x[i] = s / m[i][i];
  }
  return x;
}

struct Extremum {
  double x;
  double err;
};

// Alternating extrema of the error on a dense grid: one representative
// (largest |err|) per sign run, refined by a guarded parabolic step.
inline std::vector<Extremum> alternating_extrema(const std::function<double(double)>& f,
                                                 const PolyApprox& p, int grid_size) {
  std::vector<Extremum> out;
  const double h = (p.b - p.a) / grid_size;
  int run_sign = 0;
  Extremum best{p.a, 0.0};
  auto err_at = [&](double x) { return f(x) - eval_poly(p, x); };
  for (int i = 0; i <= grid_size; ++i) {
    const double x = p.a + h * i;
    const double e = err_at(x);
    const int s = e > 0.0 ? 1 : (e < 0.0 ? -1 : run_sign);
    if (s != run_sign && run_sign != 0) {
      out.push_back(best);
      best = Extremum{x, e};
    } else if (std::abs(e) > std::abs(best.err)) {
      best = Extremum{x, e};
    }
    run_sign = s == 0 ? run_sign : s;
  }
  out.push_back(best);
  for (auto& ext : out) {
    // parabolic refinement, kept only when it actually enlarges |err|
    const double x0 = std::max(p.a, ext.x - h), x2 = std::min(p.b, ext.x + h);
    const double e0 = err_at(x0), e1 = ext.err, e2 = err_at(x2);
    const double denom = e0 - 2.0 * e1 + e2;
    if (x0 < ext.x && ext.x < x2 && std::abs(denom) > 1e-300) {
      const double xr = ext.x + 0.5 * h * (e0 - e2) / denom;
      if (xr > x0 && xr < x2) {
        const double er = err_at(xr);
        if (std::abs(er) > std::abs(ext.err)) ext = Extremum{xr, er};
      }
    }
  }
  return out;
}

}  // namespace detail

/// Interpolant at degree+1 Chebyshev nodes mapped to [a, b].
template <typename F>
PolyApprox chebyshev_interpolant(F&& f, double a, double b, int degree) {
  if (!(a < b)) throw std::invalid_argument("chebyshev_interpolant: need a < b");
  if (degree < 0) throw std::invalid_argument("chebyshev_interpolant: degree must be >= 0");
  const int m = degree + 1;
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  std::vector<double> fx(m);
  for (int j = 0; j < m; ++j) {
    const double xi = std::cos(M_PI * (2.0 * j + 1.0) / (2.0 * m));
    fx[j] = f(mid + half * xi);
    if (!std::isfinite(fx[j]))
      throw std::invalid_argument("chebyshev_interpolant: non-finite node value");
  }
  PolyApprox p;
  p.a = a;
  p.b = b;
  p.degree = degree;
  p.coeffs.resize(m);
  for (int k = 0; k < m; ++k) {
    double s = 0.0;
    for (int j = 0; j < m; ++j)
      s += fx[j] * std::cos(k * M_PI * (2.0 * j + 1.0) / (2.0 * m));
    p.coeffs[static_cast<std::size_t>(k)] = 2.0 * s / m;
  }
  p.coeffs[0] *= 0.5;
  std::function<double(double)> fn = std::forward<F>(f);
  p.sup_error = detail::measured_sup_error(fn, p);
  return p;
}

namespace detail {

inline double hash_unit(std::uint32_t v) {
  v *= 2654435761u;
  v ^= v >> 16;
  return static_cast<double>(v % 4096u) / 4096.0 - 0.5;
}

struct RemezAttempt {
  bool converged = false;
  PolyApprox poly;
  double emax = std::numeric_limits<double>::infinity();
};

/// One exchange run at a fixed degree. Symmetric functions make the
/// levelled system degenerate (an interpolant with E = 0 solves it), so
/// references are de-symmetrized by a deterministic jitter and perturbed
/// again whenever a degenerate solve shows up.
inline RemezAttempt remez_exchange(const std::function<double(double)>& fn, double a, double b,
                                   int degree, const RemezOptions& opts, std::uint32_t salt) {
  const int m = degree + 2;
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  std::vector<double> ref(m);
  auto reset_reference = [&](std::uint32_t round) {
    for (int i = 0; i < m; ++i) {
      double x = mid - half * std::cos(M_PI * i / (m - 1));
      if (i > 0 && i + 1 < m) {
        const double gap = half * (M_PI / (m - 1));
        x += 0.3 * gap * hash_unit(static_cast<std::uint32_t>(i) + 7919u * (salt + round));
      }
      ref[static_cast<std::size_t>(i)] = std::clamp(x, a, b);
    }
    std::sort(ref.begin(), ref.end());
  };
  auto perturb_reference = [&](std::uint32_t round) {
    for (int i = 1; i + 1 < m; ++i) {
      const double gap = 0.5 * (ref[static_cast<std::size_t>(i) + 1] -
                                ref[static_cast<std::size_t>(i) - 1]);
      ref[static_cast<std::size_t>(i)] +=
          0.25 * gap * hash_unit(static_cast<std::uint32_t>(i) + 104729u * (salt + round + 1));
      ref[static_cast<std::size_t>(i)] = std::clamp(ref[static_cast<std::size_t>(i)], a, b);
    }
    std::sort(ref.begin(), ref.end());
  };
  reset_reference(0);

  double fmax = 0.0;
  for (int i = 0; i <= 64; ++i) {
    const double v = fn(a + (b - a) * i / 64.0);
    if (!std::isfinite(v))
      throw std::invalid_argument("remez_best_approx: non-finite function value");
    fmax = std::max(fmax, std::abs(v));
  }
  const double tiny = 1e-14 * std::max(1.0, fmax);

  RemezAttempt out;
  out.poly.a = a;
  out.poly.b = b;
  out.poly.degree = degree;
  out.poly.coeffs.assign(static_cast<std::size_t>(degree) + 1, 0.0);
  PolyApprox p = out.poly;
  int degenerate_rounds = 0;

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    // Levelled system: p(x_i) + (-1)^i E = f(x_i) on the reference.
    std::vector<std::vector<double>> mat(m, std::vector<double>(m));
    std::vector<double> rhs(m);
    for (int i = 0; i < m; ++i) {
      const double xi = (2.0 * ref[static_cast<std::size_t>(i)] - a - b) / (b - a);
      double t0 = 1.0, t1 = xi;
      for (int j = 0; j <= degree; ++j) {
        mat[i][static_cast<std::size_t>(j)] = (j == 0) ? 1.0 : (j == 1 ? xi : t1);
        if (j >= 1) {
          const double t2 = 2.0 * xi * t1 - t0;
          t0 = t1;
          t1 = t2;
        }
      }
      mat[i][static_cast<std::size_t>(degree) + 1] = (i % 2 == 0) ? 1.0 : -1.0;
      rhs[i] = fn(ref[static_cast<std::size_t>(i)]);
      if (!std::isfinite(rhs[i]))
        throw std::invalid_argument("remez_best_approx: non-finite reference value");
    }
    std::vector<double> sol;
    try {
      sol = detail::solve_dense(std::move(mat), std::move(rhs));
    } catch (const std::runtime_error&) {
      if (++degenerate_rounds > 4) return out;
      perturb_reference(static_cast<std::uint32_t>(iter));
      continue;
    }
    for (int j = 0; j <= degree; ++j)
      p.coeffs[static_cast<std::size_t>(j)] = sol[static_cast<std::size_t>(j)];
    const double levelled = std::abs(sol[static_cast<std::size_t>(degree) + 1]);

    auto extrema = detail::alternating_extrema(fn, p, opts.grid_size);
    double emax = 0.0;
    for (const auto& e : extrema) emax = std::max(emax, std::abs(e.err));
    if (emax < out.emax) {
      out.poly = p;
      out.poly.sup_error = emax;
      out.emax = emax;
    }

    if (emax <= tiny) {
      out.poly = p;
      out.converged = true;
      return out;
    }
    // degenerate solve: interpolation instead of levelling, or too few
    // alternation runs to exchange
    if (levelled <= tiny || static_cast<int>(extrema.size()) < m) {
      if (++degenerate_rounds > 4) return out;
      perturb_reference(static_cast<std::uint32_t>(iter));
      continue;
    }
    if (emax <= (1.0 + opts.tol) * levelled + tiny) {
      out.poly = p;
      out.converged = true;
      return out;
    }

    // Trim to degree+2 alternating points, keeping the global maximum.
    std::size_t arg = 0;
    for (std::size_t i = 1; i < extrema.size(); ++i)
      if (std::abs(extrema[i].err) > std::abs(extrema[arg].err)) arg = i;
    while (static_cast<int>(extrema.size()) > m) {
      const bool drop_front = (arg != 0) && (std::abs(extrema.front().err) <=
                                             std::abs(extrema.back().err) ||
                                             arg == extrema.size() - 1);
      if (drop_front) {
        extrema.erase(extrema.begin());
        --arg;
      } else {
        extrema.pop_back();
      }
    }
    for (int i = 0; i < m; ++i) ref[static_cast<std::size_t>(i)] = extrema[static_cast<std::size_t>(i)].x;
  }
  return out;
}

}  // namespace detail

/// Best uniform approximation by the exchange algorithm. The returned
/// sup_error satisfies sup_error <= (1 + tol) * (true minimax error).
/// Even or odd functions are handled by retrying one degree higher (their
/// equioscillation carries an extra alternation) and truncating the
/// vanishing top coefficient.
template <typename F>
PolyApprox remez_best_approx(F&& f, double a, double b, int degree,
                             RemezOptions opts = RemezOptions{}) {
  if (!(a < b)) throw std::invalid_argument("remez_best_approx: need a < b");
  if (degree < 0) throw std::invalid_argument("remez_best_approx: degree must be >= 0");
  if (degree > 64) throw std::invalid_argument("remez_best_approx: degree capped at 64");
  std::function<double(double)> fn = std::forward<F>(f);

  detail::RemezAttempt best;
  best.poly.a = a;
  best.poly.b = b;
  best.poly.degree = degree;
  best.poly.coeffs.assign(static_cast<std::size_t>(degree) + 1, 0.0);
  for (std::uint32_t salt = 0; salt < 2; ++salt) {
    const auto attempt = detail::remez_exchange(fn, a, b, degree, opts, salt);
    if (attempt.converged) {
      PolyApprox p = attempt.poly;
      p.sup_error = detail::measured_sup_error(fn, p);
      return p;
    }
    if (attempt.emax < best.emax) best = attempt;
  }
  // parity-degenerate case: solve at degree + 1 and drop the zero top term
  for (std::uint32_t salt = 0; salt < 2; ++salt) {
    const auto bumped = detail::remez_exchange(fn, a, b, degree + 1, opts, 11u + salt);
    if (!bumped.converged) continue;
    double scale = 0.0;
    for (const double c : bumped.poly.coeffs) scale = std::max(scale, std::abs(c));
    if (std::abs(bumped.poly.coeffs.back()) <= 1e-8 * std::max(scale, 1e-300)) {
      PolyApprox p = bumped.poly;
      p.coeffs.pop_back();
      p.degree = degree;
      p.sup_error = detail::measured_sup_error(fn, p);
      return p;
    }
  }
  PolyApprox fallback = best.poly;
  fallback.sup_error = detail::measured_sup_error(fn, fallback);
  throw RemezConvergenceError("remez_best_approx: exchange did not converge", fallback);
}

/// Coefficients m_k with p(x) = sum m_k x^k on [a, b]. Conversion is
/// well conditioned only at moderate degree; intended for the factorial
/// moment estimators (degree ~ ln n) and debugging.
inline std::vector<double> monomial_coefficients(const PolyApprox& p) {
  if (p.basis == PolyBasis::Monomial) return p.coeffs;
  const int k = p.degree;
  // Chebyshev -> monomial in xi.
  std::vector<double> mono_xi(static_cast<std::size_t>(k) + 1, 0.0);
  std::vector<double> tprev{1.0}, tcur{0.0, 1.0};
  for (int j = 0; j <= k; ++j) {
    const std::vector<double>& tj = (j == 0) ? tprev : tcur;
    for (std::size_t i = 0; i < tj.size(); ++i) mono_xi[i] += p.coeffs[static_cast<std::size_t>(j)] * tj[i];
    if (j >= 1 && j < k) {
      std::vector<double> tnext(tcur.size() + 1, 0.0);
      for (std::size_t i = 0; i < tcur.size(); ++i) tnext[i + 1] += 2.0 * tcur[i];
      for (std::size_t i = 0; i < tprev.size(); ++i) tnext[i] -= tprev[i];
      tprev = std::move(tcur);
      tcur = std::move(tnext);
    }
  }
  // Substitute xi = alpha*x + beta by Horner with polynomial arithmetic.
  const double alpha = 2.0 / (p.b - p.a);
  const double beta = -(p.a + p.b) / (p.b - p.a);
  std::vector<double> out{0.0};
  for (int j = k; j >= 0; --j) {
    std::vector<double> next(out.size() + 1, 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
      next[i] += out[i] * beta;
      next[i + 1] += out[i] * alpha;
    }
    while (next.size() > static_cast<std::size_t>(k) + 1) next.pop_back();
    next[0] += mono_xi[static_cast<std::size_t>(j)];
    out = std::move(next);
  }
  out.resize(static_cast<std::size_t>(k) + 1, 0.0);
  return out;
}

inline PolyApprox to_monomial(const PolyApprox& p) {
  PolyApprox out = p;
  out.coeffs = monomial_coefficients(p);
  out.basis = PolyBasis::Monomial;
  return out;
}

}  // namespace limitest
