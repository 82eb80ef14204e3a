#pragma once

// Hidden Markov field on a small grid with manifold-valued outputs. The
// Gibbs energy of a configuration q is
//
//   E(q) = sum_z V(q_z) + (1/2) sum_{ordered w~z} J(q_z, q_w)
//        = sum_z V(q_z) + sum_{edges {z,w}} J(q_z, q_w)
//
// and everything here (partition function, posteriors, likelihood, M-step
// moments) is computed by exact enumeration of the |S|^{|Z|} configurations,
// behind a 1e6 guard.
//
// The energy is invariant under exactly two shifts on grids with unequal
// vertex degrees, V -> V + c and J -> J + c; both are gauge-fixed by
// V[0] = 0 and J(0,0) = 0, which leaves the representable family intact.
// Degree-regular grids (1xN, 2x2) admit one extra flat direction; the
// M-step detects exact flat directions combinatorially and returns the
// minimum-norm maximizer, so its answer is always unique.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mhmm/errors.hpp"
#include "mhmm/hmm/m_step.hpp"
#include "mhmm/hmm/params.hpp"
#include "mhmm/mrf/grid.hpp"

namespace mhmm::mrf {

struct FieldParams {
  std::shared_ptr<const geometry::LocationScaleFamily> family;
  Eigen::VectorXd V;   // |S| vertex potentials, V[0] = 0
  Eigen::MatrixXd J;   // |S| x |S| symmetric edge potentials, J(0,.) = 0
  std::vector<hmm::Emission> emissions;

  int n_states() const { return static_cast<int>(emissions.size()); }

  void validate() const {
    if (!family) throw DomainError("field params: missing family");
    const int s = n_states();
    if (s < 1) throw DomainError("field params: at least one state required");
    if (V.size() != s || J.rows() != s || J.cols() != s)
      throw DomainError("field params: potential shape mismatch");
    if ((J - J.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw DomainError("field params: J must be symmetric");
    if (std::fabs(V[0]) > 0.0)
      throw DomainError("field params: gauge requires V[0] = 0");
    if (std::fabs(J(0, 0)) > 0.0)
      throw DomainError("field params: gauge requires J(0,0) = 0");
    for (const hmm::Emission& e : emissions) {
      if (e.ybar.manifold() != family->manifold())
        throw ManifoldMismatchError(
            "field params: emission location off the family manifold");
      if (!family->sigma_interval().contains(e.sigma))
        throw DomainError("field params: sigma outside admissible interval");
    }
  }
};

struct FieldPosteriors {
  Eigen::MatrixXd omega_site;  // |Z| x S site marginals, rows sum to 1
  Eigen::VectorXd omega;       // aggregated over sites
  Eigen::MatrixXd nu;          // S x S sums over ordered adjacent pairs
};

/// Shift arbitrary potentials into the gauge (V[0] = 0, J(0,0) = 0) without
/// changing the distribution.
inline void gauge_fix(Eigen::VectorXd& v, Eigen::MatrixXd& j) {
  v.array() -= v[0];
  j.array() -= j(0, 0);
}

namespace detail {

inline std::size_t checked_config_count(int n_states, int n_sites) {
  double count = 1.0;
  for (int z = 0; z < n_sites; ++z) {
    count *= n_states;
    if (count > 1e6)
      throw EnumerationGuardError(
          "configuration enumeration guard exceeded: |S|^{|Z|} > 1e6; "
          "use a smaller grid");
  }
  return static_cast<std::size_t>(count);
}

/// Calls visit(q) for every configuration, in odometer (site-0 fastest)
/// order.
template <typename Visit>
void enumerate_configs(int n_states, int n_sites, Visit&& visit) {
  checked_config_count(n_states, n_sites);
  std::vector<int> q(n_sites, 0);
  while (true) {
    visit(const_cast<const std::vector<int>&>(q));
    int z = 0;
    for (; z < n_sites; ++z) {
      if (++q[z] < n_states) break;
      q[z] = 0;
    }
    if (z == n_sites) break;
  }
}

inline double gibbs_energy(const GridGraph& grid, const Eigen::VectorXd& v,
                           const Eigen::MatrixXd& j,
                           const std::vector<int>& q) {
  double e = 0.0;
  for (int z = 0; z < grid.n_sites(); ++z) e += v[q[z]];
  for (const auto& [z, w] : grid.edges()) e += j(q[z], q[w]);
  return e;
}

}  // namespace detail

/// Psi = log W(V, J) by exact enumeration; accepts arbitrary (V, J), not
/// only gauge-fixed ones.
inline double log_partition_exact(const GridGraph& grid,
                                  const Eigen::VectorXd& v,
                                  const Eigen::MatrixXd& j) {
  std::vector<double> energies;
  energies.reserve(detail::checked_config_count(
      static_cast<int>(v.size()), grid.n_sites()));
  detail::enumerate_configs(static_cast<int>(v.size()), grid.n_sites(),
                            [&](const std::vector<int>& q) {
                              energies.push_back(
                                  detail::gibbs_energy(grid, v, j, q));
                            });
  const double m = *std::max_element(energies.begin(), energies.end());
  double sum = 0.0;
  for (double e : energies) sum += std::exp(e - m);
  return m + std::log(sum);
}

inline double log_partition_exact(const FieldParams& field,
                                  const GridGraph& grid) {
  field.validate();
  return log_partition_exact(grid, field.V, field.J);
}

namespace detail {

inline Eigen::MatrixXd emission_log_table(
    const FieldParams& field, const std::vector<geometry::ManifoldPoint>& obs) {
  const int s = field.n_states();
  Eigen::MatrixXd logf(obs.size(), s);
  std::vector<double> eta(s), psi(s);
  for (int a = 0; a < s; ++a) {
    eta[a] = field.family->checked_eta(field.emissions[a].sigma);
    psi[a] = field.family->log_partition(eta[a]);
  }
  for (std::size_t z = 0; z < obs.size(); ++z)
    for (int a = 0; a < s; ++a)
      logf(static_cast<Eigen::Index>(z), a) =
          eta[a] * field.family->statistic(obs[z], field.emissions[a].ybar) -
          psi[a];
  return logf;
}

}  // namespace detail

/// Exact observed-data log-likelihood log p(y | theta).
inline double field_loglik_exact(const FieldParams& field,
                                 const GridGraph& grid,
                                 const std::vector<geometry::ManifoldPoint>& obs) {
  field.validate();
  if (static_cast<int>(obs.size()) != grid.n_sites())
    throw DomainError("field loglik: observation/site count mismatch");
  const Eigen::MatrixXd logf = detail::emission_log_table(field, obs);
  std::vector<double> joint;
  joint.reserve(detail::checked_config_count(field.n_states(),
                                             grid.n_sites()));
  detail::enumerate_configs(
      field.n_states(), grid.n_sites(), [&](const std::vector<int>& q) {
        double lw = detail::gibbs_energy(grid, field.V, field.J, q);
        for (int z = 0; z < grid.n_sites(); ++z) lw += logf(z, q[z]);
        joint.push_back(lw);
      });
  const double m = *std::max_element(joint.begin(), joint.end());
  double sum = 0.0;
  for (double lw : joint) sum += std::exp(lw - m);
  return m + std::log(sum) - log_partition_exact(grid, field.V, field.J);
}

/// Exact site marginals and ordered-pair sums of P(q | y).
inline FieldPosteriors field_posteriors_exact(
    const FieldParams& field, const GridGraph& grid,
    const std::vector<geometry::ManifoldPoint>& obs) {
  field.validate();
  if (static_cast<int>(obs.size()) != grid.n_sites())
    throw DomainError("field posteriors: observation/site count mismatch");
  const int s = field.n_states();
  const int n = grid.n_sites();
  const Eigen::MatrixXd logf = detail::emission_log_table(field, obs);

  std::vector<double> joint;
  joint.reserve(detail::checked_config_count(s, n));
  detail::enumerate_configs(s, n, [&](const std::vector<int>& q) {
    double lw = detail::gibbs_energy(grid, field.V, field.J, q);
    for (int z = 0; z < n; ++z) lw += logf(z, q[z]);
    joint.push_back(lw);
  });
  const double m = *std::max_element(joint.begin(), joint.end());

  FieldPosteriors post;
  post.omega_site = Eigen::MatrixXd::Zero(n, s);
  post.nu = Eigen::MatrixXd::Zero(s, s);
  double total = 0.0;
  std::size_t i = 0;
  detail::enumerate_configs(s, n, [&](const std::vector<int>& q) {
    const double w = std::exp(joint[i++] - m);
    total += w;
    for (int z = 0; z < n; ++z) post.omega_site(z, q[z]) += w;
    for (const auto& [z, wv] : grid.edges()) {
      post.nu(q[z], q[wv]) += w;  // ordered: each edge contributes twice
      post.nu(q[wv], q[z]) += w;
    }
  });
  post.omega_site /= total;
  post.nu /= total;
  post.omega = post.omega_site.colwise().sum().transpose();
  return post;
}

// ---- M-step ---------------------------------------------------------------

namespace detail {

// Free coordinates of the gauge-fixed (V, J): V_a for a >= 1 and J_ab for
// 0 <= a <= b excluding (0,0). The Gibbs energy is exactly x . stats(q) in
// these coordinates, so the M-step is a plain concave exponential-family
// maximum-likelihood problem and its stationarity matches every marginal
// and pair moment (the two gauge-fixed ones follow from the sum rules).
struct FreeCoords {
  int s;
  int k;  // number of free coordinates

  explicit FreeCoords(int n_states)
      : s(n_states),
        k((n_states - 1) + n_states * (n_states + 1) / 2 - 1) {}

  int v_index(int a) const { return a - 1; }
  int j_index(int a, int b) const {  // 0 <= a <= b, (a,b) != (0,0)
    // rank of (a,b) in row-major upper-triangle order, minus the (0,0) slot
    int offset = 0;
    for (int r = 0; r < a; ++r) offset += s - r;
    return (s - 1) + offset + (b - a) - 1;
  }

  Eigen::VectorXd pack(const Eigen::VectorXd& v,
                       const Eigen::MatrixXd& j) const {
    Eigen::VectorXd x(k);
    for (int a = 1; a < s; ++a) x[v_index(a)] = v[a];
    for (int a = 0; a < s; ++a)
      for (int b = a; b < s; ++b)
        if (a + b > 0) x[j_index(a, b)] = j(a, b);
    return x;
  }

  void unpack(const Eigen::VectorXd& x, Eigen::VectorXd& v,
              Eigen::MatrixXd& j) const {
    v = Eigen::VectorXd::Zero(s);
    j = Eigen::MatrixXd::Zero(s, s);
    for (int a = 1; a < s; ++a) v[a] = x[v_index(a)];
    for (int a = 0; a < s; ++a)
      for (int b = a; b < s; ++b)
        if (a + b > 0) j(a, b) = j(b, a) = x[j_index(a, b)];
  }

  // Sufficient statistics of a configuration: state counts n_a (a >= 1) and
  // unordered-edge label counts e_ab ((a,b) != (0,0)).
  void stats(const GridGraph& grid, const std::vector<int>& q,
             Eigen::VectorXd& phi) const {
    phi.setZero(k);
    for (int z = 0; z < grid.n_sites(); ++z)
      if (q[z] >= 1) phi[v_index(q[z])] += 1.0;
    for (const auto& [z, w] : grid.edges()) {
      const int a = std::min(q[z], q[w]);
      const int b = std::max(q[z], q[w]);
      if (a + b > 0) phi[j_index(a, b)] += 1.0;
    }
  }

  // Target moments from posteriors: omega_a for V, nu_ab for a < b and
  // nu_aa / 2 on the diagonal (nu sums ordered pairs, e_ab counts edges).
  Eigen::VectorXd targets(const FieldPosteriors& post) const {
    Eigen::VectorXd b(k);
    for (int a = 1; a < s; ++a) b[v_index(a)] = post.omega[a];
    for (int a = 0; a < s; ++a)
      for (int bb = a; bb < s; ++bb) {
        if (a + bb == 0) continue;
        b[j_index(a, bb)] = a == bb ? 0.5 * post.nu(a, a) : post.nu(a, bb);
      }
    return b;
  }
};

}  // namespace detail

struct FieldMStepResult {
  FieldParams params;
  std::vector<std::string> flags;
  int newton_iterations = 0;
  double gradient_norm = 0.0;
};

/// Maximize <omega,V> + <nu,J>/2 - Psi(V,J) over the gauge-fixed potentials
/// (damped Newton on the concave objective, with moments by enumeration),
/// then update emissions with site-indexed weights exactly like the chain
/// M-step.
inline FieldMStepResult field_m_step(
    const FieldParams& prev, const GridGraph& grid,
    const std::vector<geometry::ManifoldPoint>& obs,
    const FieldPosteriors& post,
    const numerics::FrechetConfig& frechet_cfg = {},
    const numerics::RootSolveConfig& root_cfg = {},
    bool freeze_pair_potentials = false, double gradient_tolerance = 1e-8,
    int max_newton_iterations = 200) {
  prev.validate();
  const int s = prev.n_states();
  const detail::FreeCoords coords(s);
  const std::size_t n_configs =
      detail::checked_config_count(s, grid.n_sites());

  // One enumeration pass collecting the sufficient statistics of every
  // configuration; Newton iterations then never re-enumerate.
  Eigen::MatrixXd all_stats(n_configs, coords.k);
  {
    Eigen::VectorXd phi(coords.k);
    std::size_t i = 0;
    detail::enumerate_configs(s, grid.n_sites(),
                              [&](const std::vector<int>& q) {
                                coords.stats(grid, q, phi);
                                all_stats.row(i++) = phi.transpose();
                              });
  }

  // Exact flat directions of the energy: coordinate directions along which
  // phi is constant over every configuration (one survives the gauge on
  // degree-regular graphs, e.g. the 2x2 grid). They never affect the
  // distribution or the objective; the solution is canonicalized to the
  // minimum-norm maximizer by projecting them out at the end.
  std::vector<Eigen::VectorXd> flat_dirs;
  if (coords.k > 0 && !freeze_pair_potentials) {
    const Eigen::VectorXd uniform_mean =
        all_stats.colwise().mean().transpose();
    const Eigen::MatrixXd centered_gram =
        all_stats.transpose() * all_stats / static_cast<double>(n_configs) -
        uniform_mean * uniform_mean.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(centered_gram);
    const double scale = std::max(1.0, es.eigenvalues().maxCoeff());
    for (int i = 0; i < coords.k; ++i)
      if (es.eigenvalues()[i] < 1e-12 * scale)
        flat_dirs.push_back(es.eigenvectors().col(i));
  }

  const Eigen::VectorXd b = coords.targets(post);
  Eigen::VectorXd x = coords.pack(prev.V, prev.J);

  // mask of coordinates being optimized (J frozen on request)
  std::vector<bool> active(coords.k, true);
  if (freeze_pair_potentials)
    for (int a = 0; a < s; ++a)
      for (int bb = a; bb < s; ++bb)
        if (a + bb > 0) active[coords.j_index(a, bb)] = false;

  auto moments = [&](const Eigen::VectorXd& xv, double& log_w,
                     Eigen::VectorXd& mean, Eigen::MatrixXd& cov) {
    const Eigen::VectorXd energy = all_stats * xv;
    const double m = energy.maxCoeff();
    const Eigen::VectorXd w = (energy.array() - m).exp();
    const double total = w.sum();
    log_w = m + std::log(total);
    mean = all_stats.transpose() * w / total;
    cov = all_stats.transpose() * w.asDiagonal() * all_stats / total -
          mean * mean.transpose();
  };

  auto objective = [&](const Eigen::VectorXd& xv) {
    const Eigen::VectorXd energy = all_stats * xv;
    const double m = energy.maxCoeff();
    const double log_w = m + std::log((energy.array() - m).exp().sum());
    return b.dot(xv) - log_w;
  };

  FieldMStepResult result;
  result.params = prev;
  double log_w;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  int it = 0;
  for (; it < max_newton_iterations; ++it) {
    moments(x, log_w, mean, cov);
    Eigen::VectorXd grad = b - mean;
    for (int i = 0; i < coords.k; ++i)
      if (!active[i]) grad[i] = 0.0;
    result.gradient_norm = grad.norm();
    if (result.gradient_norm < gradient_tolerance) break;

    Eigen::MatrixXd h = cov;
    for (int i = 0; i < coords.k; ++i) {
      if (!active[i]) {
        h.row(i).setZero();
        h.col(i).setZero();
        h(i, i) = 1.0;
      }
      h(i, i) += 1e-12;
    }
    Eigen::VectorXd dir = h.ldlt().solve(grad);
    // Armijo backtracking on the concave objective
    const double g0 = objective(x);
    const double slope = grad.dot(dir);
    double step = 1.0;
    Eigen::VectorXd xn = x + step * dir;
    for (int ls = 0; ls < 60 && objective(xn) < g0 + 1e-4 * step * slope;
         ++ls) {
      step *= 0.5;
      xn = x + step * dir;
    }
    x = xn;
  }
  result.newton_iterations = it;
  if (result.gradient_norm >= gradient_tolerance)
    throw DomainError(
        "field m-step did not converge: gradient norm = " +
        std::to_string(result.gradient_norm));

  for (const Eigen::VectorXd& dir : flat_dirs) x -= dir * dir.dot(x);
  coords.unpack(x, result.params.V, result.params.J);
  update_emissions(*prev.family, obs, post.omega_site,
                   result.params.emissions, result.flags, frechet_cfg,
                   root_cfg);
  return result;
}

struct FieldEmOptions {
  int max_iterations = 50;
  double tolerance = 1e-6;
  bool freeze_pair_potentials = false;
  numerics::FrechetConfig frechet;
  numerics::RootSolveConfig root;
};

struct FieldEmResult {
  FieldParams params;
  std::vector<double> loglik_trace;
  double final_loglik = 0.0;
  int iterations = 0;
  std::vector<std::string> flags;
};

inline FieldEmResult field_em_fit(const FieldParams& field0,
                                  const GridGraph& grid,
                                  const std::vector<geometry::ManifoldPoint>& obs,
                                  const FieldEmOptions& opts = {}) {
  field0.validate();
  FieldEmResult result;
  result.params = field0;
  for (int k = 0; k < opts.max_iterations; ++k) {
    result.loglik_trace.push_back(
        field_loglik_exact(result.params, grid, obs));
    const FieldPosteriors post =
        field_posteriors_exact(result.params, grid, obs);
    FieldMStepResult step = field_m_step(
        result.params, grid, obs, post, opts.frechet, opts.root,
        opts.freeze_pair_potentials);
    for (const std::string& f : step.flags)
      result.flags.push_back("iteration " + std::to_string(k + 1) + ": " + f);

    double delta = (result.params.V - step.params.V).cwiseAbs().maxCoeff();
    delta = std::max(delta,
                     (result.params.J - step.params.J).cwiseAbs().maxCoeff());
    for (int a = 0; a < result.params.n_states(); ++a) {
      delta = std::max(delta, geometry::riemannian_distance(
                                  result.params.emissions[a].ybar,
                                  step.params.emissions[a].ybar));
      delta = std::max(delta, std::fabs(result.params.emissions[a].sigma -
                                        step.params.emissions[a].sigma));
    }
    result.params = std::move(step.params);
    result.iterations = k + 1;
    if (delta < opts.tolerance) break;
  }
  result.final_loglik = field_loglik_exact(result.params, grid, obs);
  return result;
}

}  // namespace mhmm::mrf
