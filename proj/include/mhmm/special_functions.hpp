#pragma once

// Scalar special functions needed by the location-scale families: the error
// function and the modified Bessel function I_nu in log scale. Both are
// written from scratch (series + continued fraction / asymptotic expansion)
// targeting ~1e-12 relative accuracy over the ranges the families use, and
// are oracle-tested against quadrature definitions in the test suite.

#include <cmath>
#include <limits>

#include "mhmm/errors.hpp"

namespace mhmm::special {

inline constexpr double kPi = 3.14159265358979323846;

namespace detail {

// erf via the confluent-hypergeometric series: all terms positive, no
// cancellation. Good for |x| <= ~3.
inline double erf_series(double x) {
  const double x2 = x * x;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 300; ++k) {
    term *= 2.0 * x2 / (2.0 * k + 1.0);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return 2.0 * x * std::exp(-x2) / std::sqrt(kPi) * sum;
}

// erfc via the Laplace continued fraction (modified Lentz), for x >= ~3:
//   erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
inline double erfc_cf(double x) {
  const double tiny = 1e-300;
  double f = x, c = x, d = 0.0;
  for (int k = 1; k < 300; ++k) {
    const double a = 0.5 * k;
    d = x + a * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = x + a / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x * x) / std::sqrt(kPi) / f;
}

}  // namespace detail

/// Error function, |error| ~ 1e-14 relative.
inline double erf(double x) {
  if (std::isnan(x)) return x;
  const double ax = std::fabs(x);
  double v;
  if (ax < 3.0) {
    v = detail::erf_series(ax);
  } else if (ax < 27.0) {
    v = 1.0 - detail::erfc_cf(ax);
  } else {
    v = 1.0;  // erfc < 1e-300
  }
  return x < 0 ? -v : v;
}

/// Complementary error function (accurate for large x where erf(x) ~ 1).
inline double erfc(double x) {
  if (x < -3.0) return 2.0 - erfc(-x);
  if (x < 3.0) return 1.0 - erf(x);
  if (x > 26.5) return 0.0;
  return detail::erfc_cf(x);
}

/// log(erf(x)) for x > 0, stable for both tiny and large x.
inline double log_erf(double x) {
  if (x <= 0.0) throw DomainError("log_erf requires x > 0");
  if (x < 0.5) return std::log(detail::erf_series(x));
  return std::log1p(-erfc(x));
}

/// log(sinh(x)) for x > 0 without overflow.
inline double log_sinh(double x) {
  if (x <= 0.0) throw DomainError("log_sinh requires x > 0");
  if (x < 1e-4) return std::log(x) + x * x / 6.0;
  return x + std::log1p(-std::exp(-2.0 * x)) - std::log(2.0);
}

namespace detail {

// Ascending series for I_nu, summed in linear scale (all terms positive).
// Used when x is small enough that e^x does not overflow; returns log I_nu.
inline double log_bessel_i_series(double nu, double x) {
  const double q = 0.25 * x * x;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 600; ++k) {
    term *= q / (k * (nu + k));
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return nu * std::log(0.5 * x) - std::lgamma(nu + 1.0) + std::log(sum);
}

// Large-x asymptotic expansion; truncated at the smallest term. Relative
// truncation error ~ e^{-2x}, negligible for the x where it is used.
inline double log_bessel_i_asymptotic(double nu, double x) {
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double sum = 1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k < 60; ++k) {
    term *= -(mu - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (8.0 * k * x);
    if (std::fabs(term) >= prev) break;  // divergent tail reached
    sum += term;
    prev = std::fabs(term);
    if (std::fabs(term) < 1e-18) break;
  }
  return x - 0.5 * std::log(2.0 * kPi * x) + std::log(sum);
}

}  // namespace detail

/// log(I_nu(x)) for nu >= 0, x > 0. Works far beyond the overflow point of
/// I_nu itself (x up to ~1e8 and more).
inline double log_bessel_i(double nu, double x) {
  if (nu < 0.0) throw DomainError("log_bessel_i requires nu >= 0");
  if (x <= 0.0) throw DomainError("log_bessel_i requires x > 0");
  // The asymptotic series needs x to dominate 4nu^2; the ascending series is
  // safe in linear scale as long as e^x is representable.
  const double cross = std::max(30.0, 2.0 * nu * nu);
  if (x < cross) return detail::log_bessel_i_series(nu, x);
  return detail::log_bessel_i_asymptotic(nu, x);
}

/// Bessel ratio I_{nu+1}(x) / I_nu(x), the mean-resultant function of the
/// von Mises-Fisher family (with nu = d/2 - 1).
inline double bessel_i_ratio(double nu, double x) {
  return std::exp(log_bessel_i(nu + 1.0, x) - log_bessel_i(nu, x));
}

}  // namespace mhmm::special
