#pragma once

// Isometries of the three manifolds: orthogonal maps of the sphere, Moebius
// maps z -> (az+b)/(conj(b) z + conj(a)) with |a|^2-|b|^2 = 1 of the disk,
// and congruences y -> g y g^T of the SPD cone.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <variant>

#include "mhmm/errors.hpp"
#include "mhmm/geometry/point.hpp"

namespace mhmm::geometry {

struct SphereIsometry {
  Eigen::MatrixXd rotation;  // orthogonal
};

struct DiskIsometry {
  std::complex<double> a, b;  // |a|^2 - |b|^2 = 1
};

struct SpdIsometry {
  Eigen::MatrixXd g;  // invertible
};

class IsometryElement {
 public:
  IsometryElement(SphereIsometry e) : value_(validate(std::move(e))) {}
  IsometryElement(DiskIsometry e) : value_(validate(std::move(e))) {}
  IsometryElement(SpdIsometry e) : value_(validate(std::move(e))) {}

  Manifold manifold() const {
    if (std::holds_alternative<SphereIsometry>(value_))
      return Manifold::Sphere;
    if (std::holds_alternative<DiskIsometry>(value_)) return Manifold::Disk;
    return Manifold::Spd;
  }

  template <typename T>
  const T& as() const {
    const T* p = std::get_if<T>(&value_);
    if (!p) throw ManifoldMismatchError("isometry/manifold mismatch");
    return *p;
  }

 private:
  static SphereIsometry validate(SphereIsometry e) {
    const Eigen::MatrixXd& r = e.rotation;
    if (r.rows() != r.cols() || r.rows() < 2)
      throw DomainError("sphere isometry must be a square matrix");
    const Eigen::MatrixXd delta =
        r.transpose() * r - Eigen::MatrixXd::Identity(r.rows(), r.cols());
    if (delta.cwiseAbs().maxCoeff() > 1e-10)
      throw DomainError("sphere isometry matrix is not orthogonal");
    return e;
  }
  static DiskIsometry validate(DiskIsometry e) {
    if (std::fabs(std::norm(e.a) - std::norm(e.b) - 1.0) > 1e-10)
      throw DomainError("disk isometry must satisfy |a|^2 - |b|^2 = 1");
    return e;
  }
  static SpdIsometry validate(SpdIsometry e) {
    if (e.g.rows() != e.g.cols() || e.g.rows() < 1)
      throw DomainError("spd isometry must be a square matrix");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(e.g);
    if (!lu.isInvertible())
      throw DomainError("spd isometry matrix is not invertible");
    return e;
  }

  std::variant<SphereIsometry, DiskIsometry, SpdIsometry> value_;
};

inline ManifoldPoint apply_isometry(const IsometryElement& g,
                                    const ManifoldPoint& y) {
  if (g.manifold() != y.manifold())
    throw ManifoldMismatchError("isometry and point on different manifolds");
  switch (y.manifold()) {
    case Manifold::Sphere: {
      Eigen::VectorXd v = g.as<SphereIsometry>().rotation * y.sphere_coords();
      v.normalize();  // scrub rounding drift off the sphere
      return ManifoldPoint::sphere(std::move(v));
    }
    case Manifold::Disk: {
      const auto& m = g.as<DiskIsometry>();
      const std::complex<double> z = y.disk_coord();
      return ManifoldPoint::disk((m.a * z + m.b) /
                                 (std::conj(m.b) * z + std::conj(m.a)));
    }
    case Manifold::Spd: {
      const Eigen::MatrixXd& gm = g.as<SpdIsometry>().g;
      Eigen::MatrixXd r = gm * y.spd_matrix() * gm.transpose();
      r = 0.5 * (r + r.transpose().eval());
      return ManifoldPoint::spd(std::move(r));
    }
  }
  throw Error("unreachable");
}

/// The canonical base point of each manifold: e_1 on the sphere, 0 in the
/// disk, the identity matrix on the SPD cone.
inline ManifoldPoint base_point(Manifold m, int dim) {
  switch (m) {
    case Manifold::Sphere: {
      Eigen::VectorXd e1 = Eigen::VectorXd::Zero(dim);
      e1[0] = 1.0;
      return ManifoldPoint::sphere(std::move(e1));
    }
    case Manifold::Disk:
      return ManifoldPoint::disk(0.0);
    case Manifold::Spd:
      return ManifoldPoint::spd(Eigen::MatrixXd::Identity(dim, dim));
  }
  throw Error("unreachable");
}

/// An isometry carrying the canonical base point to `target` (transitivity).
inline IsometryElement isometry_to(const ManifoldPoint& target) {
  switch (target.manifold()) {
    case Manifold::Sphere: {
      const Eigen::VectorXd& t = target.sphere_coords();
      const Eigen::Index d = t.size();
      Eigen::MatrixXd rot = Eigen::MatrixXd::Identity(d, d);
      Eigen::VectorXd u = Eigen::VectorXd::Zero(d);
      u[0] = 1.0;
      Eigen::VectorXd w = t - t[0] * u;
      const double wn = w.norm();
      if (wn < 1e-14) {
        if (t[0] < 0.0) {
          // antipode of the base point: rotate by pi in the (1,2)-plane
          rot(0, 0) = -1.0;
          rot(1, 1) = -1.0;
        }
        return IsometryElement(SphereIsometry{std::move(rot)});
      }
      // rotation in span(u, w/wn) taking u to t
      const Eigen::VectorXd v = w / wn;
      const double c = t[0];
      const double s = wn;
      rot += (c - 1.0) * (u * u.transpose() + v * v.transpose()) +
             s * (v * u.transpose() - u * v.transpose());
      return IsometryElement(SphereIsometry{std::move(rot)});
    }
    case Manifold::Disk: {
      const std::complex<double> w = target.disk_coord();
      const double s = std::sqrt(1.0 - std::norm(w));
      return IsometryElement(DiskIsometry{1.0 / s, w / s});
    }
    case Manifold::Spd: {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(target.spd_matrix());
      Eigen::MatrixXd sqrt_y = es.operatorSqrt();
      return IsometryElement(SpdIsometry{std::move(sqrt_y)});
    }
  }
  throw Error("unreachable");
}

}  // namespace mhmm::geometry
