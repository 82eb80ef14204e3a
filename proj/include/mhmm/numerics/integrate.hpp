#pragma once

// Panel Gauss-Legendre quadrature, in plain and log-stabilized forms. The
// log form integrates exp(logf(u)) du with a running max shift so integrands
// whose exponent reaches +-1e7 (large-scale normalizers) stay finite.

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "mhmm/errors.hpp"

namespace mhmm::numerics {

struct GaussLegendreRule {
  std::vector<double> nodes;    // on (-1, 1)
  std::vector<double> weights;
};

/// Nodes/weights of the n-point Gauss-Legendre rule (Newton on P_n).
inline GaussLegendreRule gauss_legendre(int n) {
  if (n < 2) throw DomainError("gauss_legendre: n >= 2 required");
  GaussLegendreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
    rule.weights[n - 1 - i] = rule.weights[i];
  }
  return rule;
}

/// \int_a^b f(u) du over `panels` equal panels with an n-point rule each.
inline double integrate(const std::function<double(double)>& f, double a,
                        double b, int panels = 16, int n = 32) {
  const GaussLegendreRule rule = gauss_legendre(n);
  const double h = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      s += rule.weights[i] * f(mid + 0.5 * h * rule.nodes[i]);
    total += 0.5 * h * s;
  }
  return total;
}

struct LogMoments {
  double log_integral;  // log \int e^{logf}
  double m2;            // \int u^2 e^{logf} / \int e^{logf}
  double m4;            // \int u^4 e^{logf} / \int e^{logf}
};

/// log \int_a^b e^{logf(u)} du together with the second and fourth moments
/// of u under the induced density. Deterministic summation order.
inline LogMoments log_integrate_moments(
    const std::function<double(double)>& logf, double a, double b,
    int panels = 24, int n = 32) {
  const GaussLegendreRule rule = gauss_legendre(n);
  const double h = (b - a) / panels;
  std::vector<double> ls(static_cast<std::size_t>(panels) * n);
  std::vector<double> us(ls.size());
  double lmax = -std::numeric_limits<double>::infinity();
  std::size_t k = 0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (int i = 0; i < n; ++i, ++k) {
      const double u = mid + 0.5 * h * rule.nodes[i];
      us[k] = u;
      ls[k] = logf(u) + std::log(0.5 * h * rule.weights[i]);
      if (ls[k] > lmax) lmax = ls[k];
    }
  }
  if (!std::isfinite(lmax))
    throw DomainError("log_integrate_moments: integrand vanished everywhere");
  double s0 = 0.0, s2 = 0.0, s4 = 0.0;
  for (k = 0; k < ls.size(); ++k) {
    const double w = std::exp(ls[k] - lmax);
    const double u2 = us[k] * us[k];
    s0 += w;
    s2 += w * u2;
    s4 += w * u2 * u2;
  }
  return LogMoments{lmax + std::log(s0), s2 / s0, s4 / s0};
}

}  // namespace mhmm::numerics
