#pragma once

// Simulators: hidden chains, manifold-valued emissions, and exact draws of
// tiny Gibbs fields. Everything is deterministic given (seed, stream).
//
// Emissions are drawn at the canonical base point using the family's
// rotational symmetry there, then transported to the requested location by
// the isometry carrying the base point to it (valid because the statistic D
// is invariant under the isometry group):
//   - disk: the radius solves a 1-D inverse-CDF problem for the density
//     proportional to exp(-rho^2/(2 sigma^2)) sinh(rho) (hyperbolic area
//     element), the angle is uniform;
//   - sphere: tangent-normal decomposition rejection sampler for the vMF
//     component along the mean;
//   - spd (d=2): the traceless part maps through the scaled isometry with
//     the disk (distances x sqrt2), the determinant part is a 1-D Gaussian.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "mhmm/errors.hpp"
#include "mhmm/geometry/family.hpp"
#include "mhmm/geometry/isometry.hpp"
#include "mhmm/geometry/point.hpp"
#include "mhmm/hmm/params.hpp"
#include "mhmm/mrf/field.hpp"
#include "mhmm/mrf/grid.hpp"
#include "mhmm/rng.hpp"
#include "mhmm/special_functions.hpp"

namespace mhmm::sampling {

/// Hidden path of length T: q_1 ~ pi_1, transitions by P.
inline std::vector<int> sample_chain(const hmm::HmmParams& params, int t_count,
                                     Rng& rng) {
  params.validate();
  if (t_count < 1) throw DomainError("sample_chain: T >= 1 required");
  const int s = params.n_states();
  std::vector<double> w(s);
  for (int a = 0; a < s; ++a) w[a] = params.pi1[a];
  std::vector<int> path(t_count);
  path[0] = static_cast<int>(rng.discrete(w));
  for (int t = 1; t < t_count; ++t) {
    for (int a = 0; a < s; ++a) w[a] = params.P(path[t - 1], a);
    path[t] = static_cast<int>(rng.discrete(w));
  }
  return path;
}

/// Inverse-CDF sampler for the geodesic radius of a disk Gaussian centred at
/// the origin: density proportional to exp(-rho^2/(2 sigma^2)) sinh(rho) on
/// a 2^14-node grid. The grid extends to sigma^2 + 12 sigma, beyond which
/// the tail mass is negligible at double precision.
class DiskRadialSampler {
 public:
  explicit DiskRadialSampler(double sigma) {
    if (!(sigma > 0.0)) throw DomainError("radial sampler: sigma > 0");
    const int n = 1 << 14;
    hi_ = sigma * sigma + 12.0 * sigma;
    grid_.resize(n);
    cdf_.resize(n);
    std::vector<double> logd(n);
    double m = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      grid_[i] = hi_ * (i + 1.0) / n;
      logd[i] = -grid_[i] * grid_[i] / (2.0 * sigma * sigma) +
                special::log_sinh(grid_[i]);
      m = std::max(m, logd[i]);
    }
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += std::exp(logd[i] - m);
      cdf_[i] = acc;
    }
    for (int i = 0; i < n; ++i) cdf_[i] /= acc;
  }

  double sample(Rng& rng) const { return inverse_cdf(rng.uniform()); }

  double inverse_cdf(double u) const {
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    const std::size_t j = static_cast<std::size_t>(it - cdf_.begin());
    if (j >= grid_.size()) return grid_.back();
    if (j == 0) return grid_[0] * (u / cdf_[0]);
    const double t = (u - cdf_[j - 1]) / (cdf_[j] - cdf_[j - 1]);
    return grid_[j - 1] + t * (grid_[j] - grid_[j - 1]);
  }

  /// CDF of the radius (for goodness-of-fit oracles).
  double cdf(double rho) const {
    const auto it = std::lower_bound(grid_.begin(), grid_.end(), rho);
    const std::size_t j = static_cast<std::size_t>(it - grid_.begin());
    if (j == 0) return cdf_[0] * (rho / grid_[0]);
    if (j >= grid_.size()) return 1.0;
    const double t = (rho - grid_[j - 1]) / (grid_[j] - grid_[j - 1]);
    return cdf_[j - 1] + t * (cdf_[j] - cdf_[j - 1]);
  }

 private:
  double hi_;
  std::vector<double> grid_;
  std::vector<double> cdf_;
};

namespace detail {

// Gamma(shape, 1) by Marsaglia-Tsang, with the shape < 1 boost.
inline double sample_gamma(double shape, Rng& rng) {
  if (shape < 1.0) {
    const double u = rng.uniform_pos();
    return sample_gamma(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x = rng.gaussian();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = rng.uniform_pos();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

inline double sample_beta(double a, double b, Rng& rng) {
  const double x = sample_gamma(a, rng);
  const double y = sample_gamma(b, rng);
  return x / (x + y);
}

// vMF draw about the north pole e_1 (Wood's rejection sampler).
inline Eigen::VectorXd sample_vmf_at_pole(int dim, double kappa, Rng& rng) {
  const double dm1 = dim - 1.0;
  const double b =
      (-2.0 * kappa + std::sqrt(4.0 * kappa * kappa + dm1 * dm1)) / dm1;
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + dm1 * std::log(1.0 - x0 * x0);
  double w = 0.0;
  while (true) {
    const double z = sample_beta(0.5 * dm1, 0.5 * dm1, rng);
    w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
    const double u = rng.uniform_pos();
    if (kappa * w + dm1 * std::log(1.0 - x0 * w) - c >= std::log(u)) break;
  }
  Eigen::VectorXd y(dim);
  y[0] = w;
  if (dim == 2) {
    y[1] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * std::sqrt(1.0 - w * w);
  } else {
    Eigen::VectorXd v(dim - 1);
    double n2 = 0.0;
    do {
      for (int i = 0; i < dim - 1; ++i) v[i] = rng.gaussian();
      n2 = v.squaredNorm();
    } while (n2 < 1e-280);
    v /= std::sqrt(n2);
    const double r = std::sqrt(std::max(0.0, 1.0 - w * w));
    for (int i = 0; i < dim - 1; ++i) y[i + 1] = r * v[i];
  }
  y.normalize();
  return y;
}

}  // namespace detail

/// One emission at the family's canonical base point.
inline geometry::ManifoldPoint sample_emission_at_base(
    const geometry::LocationScaleFamily& family, double sigma, Rng& rng,
    const DiskRadialSampler* radial = nullptr) {
  if (!family.sigma_interval().contains(sigma))
    throw DomainError("sample_emission: sigma outside admissible interval");
  switch (family.manifold()) {
    case geometry::Manifold::Sphere:
      return geometry::ManifoldPoint::sphere(
          detail::sample_vmf_at_pole(family.dimension(), sigma, rng));
    case geometry::Manifold::Disk: {
      const double rho = radial ? radial->sample(rng)
                                : DiskRadialSampler(sigma).sample(rng);
      const double theta = 2.0 * special::kPi * rng.uniform();
      const double r = std::tanh(0.5 * rho);
      return geometry::ManifoldPoint::disk(
          {r * std::cos(theta), r * std::sin(theta)});
    }
    case geometry::Manifold::Spd: {
      // traceless part: disk draw at scale sigma/sqrt2, distances x sqrt2
      DiskRadialSampler fallback(sigma / std::sqrt(2.0));
      const double rho = (radial ? radial->sample(rng) : fallback.sample(rng));
      const double phi = 2.0 * special::kPi * rng.uniform();
      const double a = rho * std::cos(phi);
      const double b = rho * std::sin(phi);
      const double v = sigma * rng.gaussian();  // log-determinant direction
      Eigen::Matrix2d s;
      const double t = v / std::sqrt(2.0);
      s << a + t, b, b, -a + t;
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(s);
      Eigen::Vector2d d = es.eigenvalues();
      Eigen::Matrix2d y = es.eigenvectors() *
                          Eigen::Vector2d(std::exp(d[0]), std::exp(d[1]))
                              .asDiagonal() *
                          es.eigenvectors().transpose();
      return geometry::ManifoldPoint::spd(0.5 * (y + y.transpose().eval()));
    }
  }
  throw Error("unreachable");
}

/// One emission from f(. | ybar, sigma): draw at the base point, transport
/// by the isometry carrying the base point to ybar.
inline geometry::ManifoldPoint sample_emission(
    const geometry::LocationScaleFamily& family,
    const geometry::ManifoldPoint& ybar, double sigma, Rng& rng) {
  if (ybar.manifold() != family.manifold())
    throw ManifoldMismatchError("sample_emission: location off the manifold");
  const geometry::ManifoldPoint at_base =
      sample_emission_at_base(family, sigma, rng);
  return geometry::apply_isometry(geometry::isometry_to(ybar), at_base);
}

/// Reusable per-state emission sampler (caches the radial grids and the
/// transport isometries).
class EmissionSampler {
 public:
  EmissionSampler(std::shared_ptr<const geometry::LocationScaleFamily> family,
                  std::vector<hmm::Emission> emissions)
      : family_(std::move(family)), emissions_(std::move(emissions)) {
    for (const hmm::Emission& e : emissions_) {
      transports_.push_back(geometry::isometry_to(e.ybar));
      if (family_->manifold() == geometry::Manifold::Disk)
        radial_.emplace_back(e.sigma);
      else if (family_->manifold() == geometry::Manifold::Spd)
        radial_.emplace_back(e.sigma / std::sqrt(2.0));
    }
  }

  geometry::ManifoldPoint operator()(int state, Rng& rng) const {
    const DiskRadialSampler* radial =
        radial_.empty() ? nullptr : &radial_[state];
    return geometry::apply_isometry(
        transports_[state],
        sample_emission_at_base(*family_, emissions_[state].sigma, rng,
                                radial));
  }

 private:
  std::shared_ptr<const geometry::LocationScaleFamily> family_;
  std::vector<hmm::Emission> emissions_;
  std::vector<geometry::IsometryElement> transports_;
  std::vector<DiskRadialSampler> radial_;
};

struct Simulation {
  std::vector<int> states;
  std::vector<geometry::ManifoldPoint> obs;
};

/// Hidden chain plus conditionally independent emissions.
inline Simulation simulate_hmm(const hmm::HmmParams& params, int t_count,
                               std::uint64_t seed) {
  Rng rng(seed);
  Simulation sim;
  sim.states = sample_chain(params, t_count, rng);
  EmissionSampler emit(params.family, params.emissions);
  sim.obs.reserve(t_count);
  for (int t = 0; t < t_count; ++t)
    sim.obs.push_back(emit(sim.states[t], rng));
  return sim;
}

/// Exact field draw: enumerate all configuration probabilities once, then
/// sample by inverse CDF.
class ExactFieldSampler {
 public:
  ExactFieldSampler(const mrf::FieldParams& field, const mrf::GridGraph& grid)
      : n_states_(field.n_states()), n_sites_(grid.n_sites()) {
    field.validate();
    std::vector<double> energies;
    mrf::detail::enumerate_configs(
        n_states_, n_sites_, [&](const std::vector<int>& q) {
          energies.push_back(
              mrf::detail::gibbs_energy(grid, field.V, field.J, q));
        });
    const double m = *std::max_element(energies.begin(), energies.end());
    cdf_.resize(energies.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < energies.size(); ++i) {
      acc += std::exp(energies[i] - m);
      cdf_[i] = acc;
    }
    for (double& c : cdf_) c /= acc;
  }

  std::vector<int> sample(Rng& rng) const {
    const double u = rng.uniform();
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    std::size_t index = static_cast<std::size_t>(it - cdf_.begin());
    if (index >= cdf_.size()) index = cdf_.size() - 1;
    // decode the odometer index (site 0 fastest)
    std::vector<int> q(n_sites_);
    for (int z = 0; z < n_sites_; ++z) {
      q[z] = static_cast<int>(index % n_states_);
      index /= n_states_;
    }
    return q;
  }

 private:
  int n_states_;
  int n_sites_;
  std::vector<double> cdf_;
};

inline std::vector<int> sample_field_exact(const mrf::FieldParams& field,
                                           const mrf::GridGraph& grid,
                                           Rng& rng) {
  return ExactFieldSampler(field, grid).sample(rng);
}

/// Field configuration plus site emissions.
struct FieldSimulation {
  std::vector<int> states;
  std::vector<geometry::ManifoldPoint> obs;
};

inline FieldSimulation simulate_field(const mrf::FieldParams& field,
                                      const mrf::GridGraph& grid,
                                      std::uint64_t seed) {
  Rng rng(seed);
  FieldSimulation sim;
  sim.states = sample_field_exact(field, grid, rng);
  EmissionSampler emit(field.family, field.emissions);
  sim.obs.reserve(sim.states.size());
  for (int state : sim.states) sim.obs.push_back(emit(state, rng));
  return sim;
}

}  // namespace mhmm::sampling
