#pragma once

// Points of the three supported homogeneous manifolds: the unit sphere
// S^{d-1}, the Poincare disk (curvature -1, conformal factor 4/(1-|z|^2)^2),
// and the cone of symmetric positive-definite matrices with the affine-
// invariant metric.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <string>
#include <variant>

#include "mhmm/errors.hpp"

namespace mhmm::geometry {

enum class Manifold { Sphere, Disk, Spd };

inline std::string manifold_name(Manifold m) {
  switch (m) {
    case Manifold::Sphere: return "sphere";
    case Manifold::Disk: return "disk";
    case Manifold::Spd: return "spd";
  }
  return "?";
}

struct SpherePoint {
  Eigen::VectorXd y;  // unit vector in R^d
};

struct DiskPoint {
  std::complex<double> z;  // |z| < 1
};

struct SpdPoint {
  Eigen::MatrixXd y;  // symmetric positive-definite
};

class ManifoldPoint {
 public:
  ManifoldPoint(SpherePoint p) : value_(validate(std::move(p))) {}
  ManifoldPoint(DiskPoint p) : value_(validate(std::move(p))) {}
  ManifoldPoint(SpdPoint p) : value_(validate(std::move(p))) {}

  static ManifoldPoint sphere(Eigen::VectorXd y) {
    return ManifoldPoint(SpherePoint{std::move(y)});
  }
  static ManifoldPoint disk(std::complex<double> z) {
    return ManifoldPoint(DiskPoint{z});
  }
  static ManifoldPoint spd(Eigen::MatrixXd y) {
    return ManifoldPoint(SpdPoint{std::move(y)});
  }

  Manifold manifold() const {
    if (std::holds_alternative<SpherePoint>(value_)) return Manifold::Sphere;
    if (std::holds_alternative<DiskPoint>(value_)) return Manifold::Disk;
    return Manifold::Spd;
  }

  const Eigen::VectorXd& sphere_coords() const {
    return expect<SpherePoint>("sphere").y;
  }
  std::complex<double> disk_coord() const {
    return expect<DiskPoint>("disk").z;
  }
  const Eigen::MatrixXd& spd_matrix() const {
    return expect<SpdPoint>("spd").y;
  }

 private:
  template <typename T>
  const T& expect(const char* what) const {
    const T* p = std::get_if<T>(&value_);
    if (!p)
      throw ManifoldMismatchError(std::string("point is not on the ") + what +
                                  " manifold");
    return *p;
  }

  static SpherePoint validate(SpherePoint p) {
    if (p.y.size() < 2)
      throw DomainError("sphere point needs ambient dimension >= 2");
    if (std::fabs(p.y.norm() - 1.0) > 1e-12)
      throw DomainError("sphere point is not unit-norm");
    return p;
  }
  static DiskPoint validate(DiskPoint p) {
    if (!(std::abs(p.z) < 1.0))
      throw DomainError("disk point must satisfy |z| < 1");
    return p;
  }
  static SpdPoint validate(SpdPoint p) {
    if (p.y.rows() != p.y.cols() || p.y.rows() < 1)
      throw DomainError("spd point must be a square matrix");
    if ((p.y - p.y.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw DomainError("spd point is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p.y);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw DomainError("spd point is not positive-definite");
    return p;
  }

  std::variant<SpherePoint, DiskPoint, SpdPoint> value_;
};

inline void require_same_manifold(const ManifoldPoint& a,
                                  const ManifoldPoint& b) {
  if (a.manifold() != b.manifold())
    throw ManifoldMismatchError("points on different manifolds: " +
                                manifold_name(a.manifold()) + " vs " +
                                manifold_name(b.manifold()));
}

/// Geodesic distance between two disk points,
///   d(y,z) = acosh[1 + 2|y-z|^2 / ((1-|y|^2)(1-|z|^2))],
/// evaluated as 2*asinh(sqrt(.)) which is exact near coincident points.
inline double disk_distance(std::complex<double> y, std::complex<double> z) {
  const double num = std::norm(y - z);
  const double den = (1.0 - std::norm(y)) * (1.0 - std::norm(z));
  return 2.0 * std::asinh(std::sqrt(num / den));
}

/// Squared affine-invariant distance d^2(y,z) = tr[(log(y^{-1} z))^2],
/// computed from the generalized eigenvalues of (z, y).
inline double spd_squared_distance(const Eigen::MatrixXd& y,
                                   const Eigen::MatrixXd& z) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(z, y);
  double d2 = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double l = std::log(es.eigenvalues()[i]);
    d2 += l * l;
  }
  return d2;
}

/// Riemannian geodesic distance on the point's manifold. The sphere uses
/// arccos of the inner product (the vMF family itself works with the inner
/// product statistic, not this distance).
inline double riemannian_distance(const ManifoldPoint& a,
                                  const ManifoldPoint& b) {
  require_same_manifold(a, b);
  switch (a.manifold()) {
    case Manifold::Sphere: {
      const double c = a.sphere_coords().dot(b.sphere_coords());
      return std::acos(std::min(1.0, std::max(-1.0, c)));
    }
    case Manifold::Disk:
      return disk_distance(a.disk_coord(), b.disk_coord());
    case Manifold::Spd:
      return std::sqrt(std::max(0.0, spd_squared_distance(a.spd_matrix(),
                                                          b.spd_matrix())));
  }
  return 0.0;
}

}  // namespace mhmm::geometry
