#pragma once

// The exponential location-scale families
//
//   f(y | ybar, sigma) = exp[ eta(sigma) D(y, ybar) - psi(eta(sigma)) ]
//
// with respect to the Riemannian volume measure. All families follow the
// sign convention eta < 0, with D oriented so the formulas of the M-step
// apply verbatim: the von Mises-Fisher family stores D = -<y,ybar> and
// eta = -sigma (sigma being the usual concentration), the Gaussian families
// store D = d^2(y, ybar) and eta = -1/(2 sigma^2).
//
// psi is the cumulant generating function of D, hence strictly convex, and
// psi'(eta) = E[D].

#include <cmath>
#include <memory>
#include <string>

#include "mhmm/errors.hpp"
#include "mhmm/geometry/point.hpp"
#include "mhmm/numerics/integrate.hpp"
#include "mhmm/special_functions.hpp"

namespace mhmm::geometry {

struct Interval {
  double lo, hi;
  bool contains(double x) const { return x >= lo && x <= hi; }
};

/// Scale parameters are restricted to this closed interval; outside it the
/// log-partition machinery over/underflows or the state degenerates.
inline constexpr Interval kSigmaRange{1e-4, 1e4};

class LocationScaleFamily {
 public:
  virtual ~LocationScaleFamily() = default;

  virtual std::string name() const = 0;
  virtual Manifold manifold() const = 0;
  /// Ambient dimension: d for S^{d-1} in R^d, d for d x d SPD matrices,
  /// 2 for the disk.
  virtual int dimension() const = 0;

  virtual double eta_from_sigma(double sigma) const = 0;
  virtual double sigma_from_eta(double eta) const = 0;

  Interval sigma_interval() const { return kSigmaRange; }
  Interval eta_interval() const {
    const double a = eta_from_sigma(kSigmaRange.lo);
    const double b = eta_from_sigma(kSigmaRange.hi);
    return Interval{std::min(a, b), std::max(a, b)};
  }

  /// log-partition psi(eta) and its first two derivatives.
  virtual double log_partition(double eta) const = 0;
  virtual double psi_prime(double eta) const = 0;
  virtual double psi_second(double eta) const = 0;

  /// The statistic D(y, ybar); sign-oriented so that eta < 0.
  double statistic(const ManifoldPoint& y, const ManifoldPoint& ybar) const {
    require_same_manifold(y, ybar);
    if (y.manifold() != manifold())
      throw ManifoldMismatchError("points do not match the family manifold");
    switch (manifold()) {
      case Manifold::Sphere:
        return -y.sphere_coords().dot(ybar.sphere_coords());
      case Manifold::Disk: {
        const double d = disk_distance(y.disk_coord(), ybar.disk_coord());
        return d * d;
      }
      case Manifold::Spd:
        return spd_squared_distance(y.spd_matrix(), ybar.spd_matrix());
    }
    return 0.0;
  }

  /// log f(y | ybar, sigma) w.r.t. the Riemannian volume measure.
  double log_density(const ManifoldPoint& y, const ManifoldPoint& ybar,
                     double sigma) const {
    const double eta = checked_eta(sigma);
    return eta * statistic(y, ybar) - log_partition(eta);
  }

  double checked_eta(double sigma) const {
    if (!sigma_interval().contains(sigma))
      throw DomainError("sigma = " + std::to_string(sigma) +
                        " outside the admissible interval");
    return eta_from_sigma(sigma);
  }

  void check_eta(double eta) const {
    if (!eta_interval().contains(eta))
      throw DomainError("eta = " + std::to_string(eta) +
                        " outside the admissible interval");
  }
};

/// von Mises-Fisher family on S^{d-1}. The public scale is the concentration
/// sigma >= 0; internally eta = -sigma and D = -<y, ybar>.
class VonMisesFisherFamily final : public LocationScaleFamily {
 public:
  explicit VonMisesFisherFamily(int dim) : dim_(dim) {
    if (dim < 2) throw DomainError("vmf: ambient dimension >= 2 required");
  }

  std::string name() const override { return "vmf"; }
  Manifold manifold() const override { return Manifold::Sphere; }
  int dimension() const override { return dim_; }

  double eta_from_sigma(double sigma) const override { return -sigma; }
  double sigma_from_eta(double eta) const override { return -eta; }

  // e^{psi} = (2 pi)^nu kappa^{1-nu} I_{nu-1}(kappa), nu = d/2, kappa = -eta
  double log_partition(double eta) const override {
    check_eta(eta);
    const double kappa = -eta;
    const double nu = 0.5 * dim_;
    return nu * std::log(2.0 * special::kPi) + (1.0 - nu) * std::log(kappa) +
           special::log_bessel_i(nu - 1.0, kappa);
  }

  // psi'(eta) = -A_d(kappa) with A_d = I_{d/2} / I_{d/2-1}
  double psi_prime(double eta) const override {
    check_eta(eta);
    return -resultant(-eta);
  }

  // A_d'(kappa) = 1 - A^2 - (d-1)/kappa A
  double psi_second(double eta) const override {
    check_eta(eta);
    const double kappa = -eta;
    const double a = resultant(kappa);
    return 1.0 - a * a - (dim_ - 1.0) * a / kappa;
  }

  double resultant(double kappa) const {
    return special::bessel_i_ratio(0.5 * dim_ - 1.0, kappa);
  }

 private:
  int dim_;
};

/// Riemannian Gaussian on the Poincare disk (curvature -1):
/// f = Z^{-1}(sigma) exp[-d^2(y, ybar) / (2 sigma^2)], with the closed-form
/// normalizer Z(sigma) = sqrt(2) pi^{3/2} sigma e^{sigma^2/2} erf(sigma/sqrt2)
/// matching the hyperbolic volume integral (verified by quadrature in the
/// test suite).
class DiskGaussianFamily final : public LocationScaleFamily {
 public:
  std::string name() const override { return "disk_gaussian"; }
  Manifold manifold() const override { return Manifold::Disk; }
  int dimension() const override { return 2; }

  double eta_from_sigma(double sigma) const override {
    return -0.5 / (sigma * sigma);
  }
  double sigma_from_eta(double eta) const override {
    return 1.0 / std::sqrt(-2.0 * eta);
  }

  double log_partition(double eta) const override {
    check_eta(eta);
    const double s = sigma_from_eta(eta);
    return 0.5 * std::log(2.0) + 1.5 * std::log(special::kPi) + std::log(s) +
           0.5 * s * s + special::log_erf(s / std::sqrt(2.0));
  }

  // psi'(eta) = sigma^2 + sigma^4 + sigma^3 c(sigma), the chain rule through
  // sigma(eta) = (-2 eta)^{-1/2}, with c = sqrt(2/pi) e^{-s^2/2}/erf(s/sqrt2)
  double psi_prime(double eta) const override {
    check_eta(eta);
    const double s = sigma_from_eta(eta);
    const double s2 = s * s;
    return s2 + s2 * s2 + s2 * s * ratio_c(s);
  }

  double psi_second(double eta) const override {
    check_eta(eta);
    const double s = sigma_from_eta(eta);
    const double s2 = s * s;
    const double c = ratio_c(s);
    const double cp = -s * c - c * c;  // c'(sigma)
    const double dpsip_dsigma = 2.0 * s + 4.0 * s2 * s + 3.0 * s2 * c +
                                s2 * s * cp;
    return dpsip_dsigma * s2 * s;  // dsigma/deta = sigma^3
  }

 private:
  static double ratio_c(double s) {
    const double e = special::erf(s / std::sqrt(2.0));
    return std::sqrt(2.0 / special::kPi) * std::exp(-0.5 * s * s) / e;
  }
};

/// Riemannian Gaussian on the 2x2 SPD cone with the affine-invariant metric.
/// There is no closed-form normalizer here: psi and its derivatives come
/// from a deterministic log-stabilized quadrature over the log-eigenvalue
/// chart, where the volume density reduces to
///   dvol = 2 sqrt(2) |sinh((r1-r2)/2)| dr1 dr2 dtheta,  theta in [0, pi),
/// and D = d^2 = r1^2 + r2^2. Rotating to u = (r1-r2)/sqrt2, v = (r1+r2)/sqrt2
/// factorizes Z(sigma) into a Gaussian in v times a 1-D integral in u.
class SpdGaussianFamily final : public LocationScaleFamily {
 public:
  explicit SpdGaussianFamily(int dim = 2) {
    if (dim != 2)
      throw DomainError("spd_gaussian: only d = 2 is supported");
  }

  std::string name() const override { return "spd_gaussian"; }
  Manifold manifold() const override { return Manifold::Spd; }
  int dimension() const override { return 2; }

  double eta_from_sigma(double sigma) const override {
    return -0.5 / (sigma * sigma);
  }
  double sigma_from_eta(double eta) const override {
    return 1.0 / std::sqrt(-2.0 * eta);
  }

  double log_partition(double eta) const override {
    check_eta(eta);
    const double s = sigma_from_eta(eta);
    const auto m = u_moments(s);
    // Z = sqrt(2) pi * [sigma sqrt(2 pi)] * [2 * I_u]
    return 0.5 * std::log(2.0) + std::log(special::kPi) + std::log(s) +
           0.5 * std::log(2.0 * special::kPi) + std::log(2.0) +
           m.log_integral;
  }

  // E[D] = E[v^2] + E[u^2] = sigma^2 + M2(sigma)
  double psi_prime(double eta) const override {
    check_eta(eta);
    const double s = sigma_from_eta(eta);
    return s * s + u_moments(s).m2;
  }

  // Var[D] = Var[v^2] + Var[u^2] = 2 sigma^4 + (M4 - M2^2)
  double psi_second(double eta) const override {
    check_eta(eta);
    const double s = sigma_from_eta(eta);
    const auto m = u_moments(s);
    return 2.0 * s * s * s * s + (m.m4 - m.m2 * m.m2);
  }

 private:
  // log \int_0^inf exp(-u^2/(2 s^2)) sinh(u/sqrt2) du and the u^2, u^4
  // moments of the induced radial density.
  static numerics::LogMoments u_moments(double s) {
    const double peak = s * s / std::sqrt(2.0);
    const double lo = std::max(0.0, peak - 16.0 * s);
    const double hi = peak + 16.0 * s;
    const double inv2s2 = 0.5 / (s * s);
    auto logf = [&](double u) {
      return -u * u * inv2s2 + special::log_sinh(u / std::sqrt(2.0));
    };
    return numerics::log_integrate_moments(logf, lo, hi, 24, 32);
  }
};

inline std::shared_ptr<const LocationScaleFamily> make_family(
    const std::string& name, int dim) {
  if (name == "vmf")
    return std::make_shared<VonMisesFisherFamily>(dim);
  if (name == "disk_gaussian") return std::make_shared<DiskGaussianFamily>();
  if (name == "spd_gaussian")
    return std::make_shared<SpdGaussianFamily>(dim == 0 ? 2 : dim);
  throw DomainError("unknown family: " + name);
}

}  // namespace mhmm::geometry
