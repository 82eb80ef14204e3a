#pragma once

// Exponential / logarithm maps of the three manifolds and the weighted
// Frechet (Karcher) mean. The sphere mean is the closed form y/||y|| of the
// weighted Euclidean resultant; the nonpositively-curved disk and SPD cone
// use fixed-step Riemannian gradient descent (the classical Karcher
// iteration, deterministic by construction).

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

#include "mhmm/errors.hpp"
#include "mhmm/geometry/isometry.hpp"
#include "mhmm/geometry/point.hpp"

namespace mhmm::numerics {

struct FrechetConfig {
  double gradient_tolerance = 1e-9;  // Riemannian norm of the mean log-vector
  int max_iterations = 200;
};

// ---- disk exp/log ---------------------------------------------------------
// Tangent vectors at p are complex numbers in the chart; the Riemannian norm
// at p is 2|w| / (1-|p|^2). log/exp are conjugated through the Moebius map
// taking p to the origin.

inline std::complex<double> disk_log(std::complex<double> p,
                                     std::complex<double> z) {
  const std::complex<double> u = (z - p) / (1.0 - std::conj(p) * z);
  const double r = std::abs(u);
  if (r < 1e-300) return {0.0, 0.0};
  return (1.0 - std::norm(p)) * std::atanh(r) * (u / r);
}

inline std::complex<double> disk_exp(std::complex<double> p,
                                     std::complex<double> w) {
  const std::complex<double> w0 = w / (1.0 - std::norm(p));
  const double r = std::abs(w0);
  if (r < 1e-300) return p;
  const std::complex<double> u = std::tanh(r) * (w0 / r);
  return (u + p) / (1.0 + std::conj(p) * u);
}

inline double disk_tangent_norm(std::complex<double> p,
                                std::complex<double> w) {
  return 2.0 * std::abs(w) / (1.0 - std::norm(p));
}

// ---- spd exp/log ----------------------------------------------------------
// Tangents at Y are symmetric matrices; the Riemannian norm at Y is
// ||Y^{-1/2} W Y^{-1/2}||_F.

namespace detail {

inline Eigen::MatrixXd sym_fun(const Eigen::MatrixXd& s, double (*f)(double)) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  Eigen::VectorXd d = es.eigenvalues();
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = f(d[i]);
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

struct SpdBase {
  Eigen::MatrixXd sqrt, inv_sqrt;
  explicit SpdBase(const Eigen::MatrixXd& y) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(y);
    Eigen::VectorXd d = es.eigenvalues();
    Eigen::VectorXd dr(d.size()), dri(d.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      dr[i] = std::sqrt(d[i]);
      dri[i] = 1.0 / dr[i];
    }
    sqrt = es.eigenvectors() * dr.asDiagonal() * es.eigenvectors().transpose();
    inv_sqrt =
        es.eigenvectors() * dri.asDiagonal() * es.eigenvectors().transpose();
  }
};

}  // namespace detail

inline Eigen::MatrixXd spd_log(const Eigen::MatrixXd& y,
                               const Eigen::MatrixXd& z) {
  detail::SpdBase b(y);
  const Eigen::MatrixXd mid = b.inv_sqrt * z * b.inv_sqrt;
  return b.sqrt * detail::sym_fun(0.5 * (mid + mid.transpose().eval()),
                                  +[](double x) { return std::log(x); }) *
         b.sqrt;
}

inline Eigen::MatrixXd spd_exp(const Eigen::MatrixXd& y,
                               const Eigen::MatrixXd& w) {
  detail::SpdBase b(y);
  const Eigen::MatrixXd mid = b.inv_sqrt * w * b.inv_sqrt;
  return b.sqrt * detail::sym_fun(0.5 * (mid + mid.transpose().eval()),
                                  +[](double x) { return std::exp(x); }) *
         b.sqrt;
}

inline double spd_tangent_norm(const Eigen::MatrixXd& y,
                               const Eigen::MatrixXd& w) {
  detail::SpdBase b(y);
  return (b.inv_sqrt * w * b.inv_sqrt).norm();
}

// ---- weighted Frechet mean ------------------------------------------------

namespace detail {

inline void check_weights(std::size_t n_points,
                          const std::vector<double>& weights, double& total) {
  if (n_points == 0) throw DomainError("frechet mean of an empty set");
  if (weights.size() != n_points)
    throw DomainError("points/weights length mismatch");
  total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw DomainError("negative weight");
    total += w;
  }
  if (!(total > 0.0)) throw DomainError("all weights are zero");
}

}  // namespace detail

/// argmin_y sum_t w_t D(y_t, y) where D is the family statistic: the
/// normalized resultant on the sphere (maximizing sum w <y_t, y>), the
/// weighted Riemannian centre of mass in the disk and on the SPD cone.
/// The returned point has Riemannian gradient norm (of the weight-normalized
/// objective) below the configured tolerance.
inline geometry::ManifoldPoint weighted_frechet_mean(
    const std::vector<geometry::ManifoldPoint>& points,
    const std::vector<double>& weights, const FrechetConfig& cfg = {}) {
  double total = 0.0;
  detail::check_weights(points.size(), weights, total);
  const geometry::Manifold m = points.front().manifold();
  for (const auto& p : points) {
    if (p.manifold() != m)
      throw ManifoldMismatchError("frechet mean: mixed manifolds");
  }

  switch (m) {
    case geometry::Manifold::Sphere: {
      Eigen::VectorXd r = Eigen::VectorXd::Zero(points[0].sphere_coords().size());
      for (std::size_t t = 0; t < points.size(); ++t)
        r += weights[t] * points[t].sphere_coords();
      const double n = r.norm();
      if (n < 1e-12)
        throw DegenerateMeanError(
            "spherical mean undefined: resultant vector is ~0");
      return geometry::ManifoldPoint::sphere(r / n);
    }
    case geometry::Manifold::Disk: {
      std::complex<double> y = points[0].disk_coord();
      for (int it = 0; it < cfg.max_iterations; ++it) {
        std::complex<double> g{0.0, 0.0};
        for (std::size_t t = 0; t < points.size(); ++t)
          g += weights[t] * disk_log(y, points[t].disk_coord());
        g /= total;
        if (disk_tangent_norm(y, 2.0 * g) < cfg.gradient_tolerance) break;
        y = disk_exp(y, g);
      }
      return geometry::ManifoldPoint::disk(y);
    }
    case geometry::Manifold::Spd: {
      Eigen::MatrixXd y = points[0].spd_matrix();
      for (int it = 0; it < cfg.max_iterations; ++it) {
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(y.rows(), y.cols());
        for (std::size_t t = 0; t < points.size(); ++t)
          g += weights[t] * spd_log(y, points[t].spd_matrix());
        g /= total;
        if (spd_tangent_norm(y, 2.0 * g) < cfg.gradient_tolerance) break;
        y = spd_exp(y, g);
      }
      y = 0.5 * (y + y.transpose().eval());
      return geometry::ManifoldPoint::spd(std::move(y));
    }
  }
  throw Error("unreachable");
}

}  // namespace mhmm::numerics
