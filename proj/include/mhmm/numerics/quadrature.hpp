#pragma once

// Quadrature oracles for the normalizing constants: honest 2-D integration
// of exp(eta(sigma) D(y, base)) against the Riemannian volume element of
// each manifold. These converge to e^{psi(eta(sigma))} and are used to
// validate the closed-form / 1-D-quadrature normalizers of the families.

#include <cmath>

#include "mhmm/errors.hpp"
#include "mhmm/geometry/point.hpp"
#include "mhmm/numerics/integrate.hpp"
#include "mhmm/special_functions.hpp"

namespace mhmm::numerics {

/// \int exp(eta(sigma) D) dvol over the manifold, at `resolution` nodes per
/// axis. Disk: polar coordinates with the hyperbolic area element
/// 4 (1-r^2)^{-2} r dr dtheta. Sphere (d=3): spherical coordinates with
/// area element sin(phi) dphi dtheta and the inner-product statistic.
/// SPD (d=2): log-eigenvalue coordinates (r1, r2) with volume density
/// sqrt(2) pi |sinh((r1-r2)/2)| after integrating out the rotation angle.
inline double quadrature_normalizer(geometry::Manifold kind, double sigma,
                                    int resolution = 256) {
  if (resolution < 64)
    throw DomainError("quadrature_normalizer: resolution >= 64 required");
  if (!(sigma > 0.0)) throw DomainError("quadrature_normalizer: sigma > 0");

  const GaussLegendreRule rule = gauss_legendre(resolution);
  switch (kind) {
    case geometry::Manifold::Disk: {
      const double eta = -0.5 / (sigma * sigma);
      const double rho_max = sigma * sigma + 14.0 * sigma + 10.0;
      const double r_max = std::tanh(0.5 * rho_max);
      double sum = 0.0;
      for (int i = 0; i < resolution; ++i) {
        const double r = 0.5 * r_max * (rule.nodes[i] + 1.0);
        const double w = 0.5 * r_max * rule.weights[i];
        const double rho = 2.0 * std::atanh(r);
        const double rad =
            std::exp(eta * rho * rho) * 4.0 * r /
            ((1.0 - r * r) * (1.0 - r * r));
        double angular = 0.0;  // theta sweep (constant integrand about 0)
        for (int j = 0; j < resolution; ++j)
          angular += 2.0 * special::kPi / resolution;
        sum += w * rad * angular;
      }
      return sum;
    }
    case geometry::Manifold::Sphere: {
      // d = 3: statistic is -<y, base>, eta = -sigma, so the integrand is
      // exp(sigma cos(phi)).
      double sum = 0.0;
      for (int i = 0; i < resolution; ++i) {
        const double phi = 0.5 * special::kPi * (rule.nodes[i] + 1.0);
        const double w = 0.5 * special::kPi * rule.weights[i];
        const double rad = std::exp(sigma * std::cos(phi)) * std::sin(phi);
        double angular = 0.0;
        for (int j = 0; j < resolution; ++j)
          angular += 2.0 * special::kPi / resolution;
        sum += w * rad * angular;
      }
      return sum;
    }
    case geometry::Manifold::Spd: {
      // |sinh((r1-r2)/2)| kinks on the diagonal; integrate the smooth
      // triangle r1 > r2 and double it
      const double eta = -0.5 / (sigma * sigma);
      const double span = 0.75 * sigma * sigma + 14.0 * sigma + 2.0;
      double sum = 0.0;
      for (int i = 0; i < resolution; ++i) {
        const double r1 = span * rule.nodes[i];
        const double w1 = span * rule.weights[i];
        const double width = r1 + span;  // r2 in [-span, r1]
        for (int j = 0; j < resolution; ++j) {
          const double r2 = -span + 0.5 * width * (rule.nodes[j] + 1.0);
          const double w2 = 0.5 * width * rule.weights[j];
          sum += w1 * w2 * std::exp(eta * (r1 * r1 + r2 * r2)) *
                 std::sinh(0.5 * (r1 - r2));
        }
      }
      return 2.0 * std::sqrt(2.0) * special::kPi * sum;
    }
  }
  throw Error("unreachable");
}

}  // namespace mhmm::numerics
