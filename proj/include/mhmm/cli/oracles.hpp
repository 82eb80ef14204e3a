#pragma once

// Self-contained correctness oracles, exposed both through the `oracle` CLI
// subcommand and reused by the acceptance suite: forward-backward versus
// path enumeration, normalizer closed forms versus quadrature, M-step
// optimality under random perturbations, and the exact Markov-field checks.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mhmm/geometry/family.hpp"
#include "mhmm/hmm/bruteforce.hpp"
#include "mhmm/hmm/em.hpp"
#include "mhmm/mrf/field.hpp"
#include "mhmm/numerics/frechet.hpp"
#include "mhmm/numerics/quadrature.hpp"
#include "mhmm/rng.hpp"
#include "mhmm/sampling/samplers.hpp"

namespace mhmm::cli {

using nlohmann::json;

struct OracleReport {
  std::string suite;
  bool pass = false;
  double max_deviation = 0.0;
  json details;
};

// ---- randomized model builders used by the oracles --------------------

inline Eigen::VectorXd random_simplex(Rng& rng, int n) {
  Eigen::VectorXd v(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    v[i] = -std::log(rng.uniform_pos());
    total += v[i];
  }
  return v / total;
}

inline geometry::ManifoldPoint random_disk_point(Rng& rng,
                                                 double r_max = 0.85) {
  const double r = r_max * std::sqrt(rng.uniform());
  const double a = 2.0 * special::kPi * rng.uniform();
  return geometry::ManifoldPoint::disk({r * std::cos(a), r * std::sin(a)});
}

inline hmm::HmmParams random_disk_hmm(Rng& rng, int n_states) {
  hmm::HmmParams params;
  params.family = geometry::make_family("disk_gaussian", 2);
  params.P.resize(n_states, n_states);
  for (int a = 0; a < n_states; ++a)
    params.P.row(a) = random_simplex(rng, n_states).transpose();
  params.pi1 = random_simplex(rng, n_states);
  for (int a = 0; a < n_states; ++a)
    params.emissions.push_back(
        hmm::Emission{random_disk_point(rng), 0.25 + 0.65 * rng.uniform()});
  return params;
}

// ---- forward-backward vs enumeration ------------------------------------

inline OracleReport fb_bruteforce_report(int n_instances = 100,
                                         std::uint64_t seed = 20260810,
                                         double tolerance = 1e-10) {
  Rng master(seed);
  double max_dev = 0.0;
  for (int i = 0; i < n_instances; ++i) {
    Rng rng = master.split(i);
    const int s = 2 + static_cast<int>(rng.uniform_index(2));
    const int t_count = 3 + static_cast<int>(rng.uniform_index(5));
    const hmm::HmmParams params = random_disk_hmm(rng, s);
    const sampling::Simulation sim =
        sampling::simulate_hmm(params, t_count, rng.next_u64());

    hmm::FbCache cache = hmm::forward_pass(params, sim.obs);
    hmm::backward_pass(params, cache);
    const hmm::Posteriors fast = hmm::posteriors_from_cache(params, cache);
    const hmm::Posteriors exact = hmm::bruteforce_posteriors(params, sim.obs);
    const double exact_ll = hmm::bruteforce_loglik(params, sim.obs);

    max_dev = std::max(max_dev,
                       (fast.omega - exact.omega).cwiseAbs().maxCoeff());
    max_dev = std::max(max_dev, (fast.nu - exact.nu).cwiseAbs().maxCoeff());
    max_dev = std::max(max_dev, std::fabs(cache.loglik - exact_ll));
    // the invariants that pin the normalizer convention
    for (Eigen::Index t = 0; t < cache.phi.rows(); ++t) {
      max_dev = std::max(max_dev, std::fabs(cache.phi.row(t).sum() - 1.0));
      max_dev = std::max(
          max_dev,
          std::fabs(cache.phi.row(t).dot(cache.b.row(t)) - 1.0));
    }
  }
  OracleReport report;
  report.suite = "fb-bruteforce";
  report.max_deviation = max_dev;
  report.pass = max_dev < tolerance;
  report.details = {{"instances", n_instances}, {"tolerance", tolerance}};
  return report;
}

// ---- normalizers ---------------------------------------------------------

/// 5-point central finite difference of psi at eta with relative step.
inline double psi_prime_fd(const geometry::LocationScaleFamily& family,
                           double eta, double rel_step = 1e-3) {
  const double h = rel_step * std::fabs(eta);
  return (-family.log_partition(eta + 2 * h) +
          8.0 * family.log_partition(eta + h) -
          8.0 * family.log_partition(eta - h) +
          family.log_partition(eta - 2 * h)) /
         (12.0 * h);
}

inline OracleReport normalizer_report(int resolution = 512) {
  OracleReport report;
  report.suite = "normalizers";

  const geometry::DiskGaussianFamily disk;
  double disk_dev = 0.0;
  for (double sigma : {0.2, 0.5, 1.0}) {
    const double closed = std::exp(disk.log_partition(disk.eta_from_sigma(sigma)));
    const double quad = numerics::quadrature_normalizer(
        geometry::Manifold::Disk, sigma, resolution);
    disk_dev = std::max(disk_dev, std::fabs(closed - quad) / quad);
  }

  const geometry::VonMisesFisherFamily vmf3(3);
  double sphere_dev = 0.0;
  for (double kappa : {0.5, 2.0, 7.0}) {
    const double psi = vmf3.log_partition(-kappa);
    const double identity =
        std::log(4.0 * special::kPi * std::sinh(kappa) / kappa);
    sphere_dev = std::max(sphere_dev, std::fabs(psi - identity));
  }

  double fd_dev = 0.0;
  const geometry::SpdGaussianFamily spd(2);
  const geometry::LocationScaleFamily* families[] = {&disk, &vmf3, &spd};
  for (const auto* family : families) {
    for (double sigma : {0.12, 0.35, 0.8, 1.4, 1.9}) {
      const double eta = family->eta_from_sigma(sigma);
      const double exact = family->psi_prime(eta);
      const double fd = psi_prime_fd(*family, eta);
      fd_dev = std::max(fd_dev, std::fabs(exact - fd));
    }
  }

  report.max_deviation = std::max({disk_dev, sphere_dev, fd_dev});
  report.pass = disk_dev < 1e-4 && sphere_dev < 1e-6 && fd_dev < 1e-6;
  report.details = {{"disk_rel_dev", disk_dev},
                    {"sphere_psi_dev", sphere_dev},
                    {"psi_prime_fd_dev", fd_dev},
                    {"resolution", resolution}};
  return report;
}

// ---- M-step optimality ----------------------------------------------------

inline OracleReport mstep_optimality_report(int n_instances = 100,
                                            int n_perturbations = 50,
                                            std::uint64_t seed = 20260810) {
  Rng master(seed ^ 0x5a5a'5a5a'5a5aull);
  double worst_gap = 0.0;       // most positive Q(pert) - Q(hat), want <= ~0
  double worst_grad = 0.0;      // disk Frechet gradient norm
  double worst_vmf = 0.0;       // deviation from the closed-form vMF mean
  const auto vmf = geometry::make_family("vmf", 3);

  for (int i = 0; i < n_instances; ++i) {
    Rng rng = master.split(i);
    const int s = 2 + static_cast<int>(rng.uniform_index(2));
    const int t_count = 20 + static_cast<int>(rng.uniform_index(41));
    hmm::HmmParams prev = random_disk_hmm(rng, s);
    std::vector<geometry::ManifoldPoint> obs;
    for (int t = 0; t < t_count; ++t) obs.push_back(random_disk_point(rng));

    hmm::Posteriors post;
    post.omega.resize(t_count, s);
    for (int t = 0; t < t_count; ++t)
      post.omega.row(t) =
          random_simplex(rng, s).transpose() * (0.5 + rng.uniform());
    post.nu.resize(s, s);
    for (int a = 0; a < s; ++a)
      for (int b = 0; b < s; ++b) post.nu(a, b) = 0.1 + rng.uniform();

    const hmm::MStepResult hat = hmm::m_step(prev, obs, post);
    const double q0 = hmm::q_value(hat.params, obs, post);

    for (int p = 0; p < n_perturbations; ++p) {
      const double eps = 0.01 + 0.3 * rng.uniform();
      // transition block
      {
        hmm::HmmParams pert = hat.params;
        const int a = static_cast<int>(rng.uniform_index(s));
        Eigen::VectorXd row =
            pert.P.row(a).transpose() + eps * random_simplex(rng, s);
        pert.P.row(a) = (row / row.sum()).transpose();
        worst_gap = std::max(worst_gap, hmm::q_value(pert, obs, post) - q0);
      }
      // location block
      {
        hmm::HmmParams pert = hat.params;
        const int a = static_cast<int>(rng.uniform_index(s));
        const double angle = 2.0 * special::kPi * rng.uniform();
        const std::complex<double> dir{std::cos(angle), std::sin(angle)};
        pert.emissions[a].ybar = geometry::ManifoldPoint::disk(
            numerics::disk_exp(pert.emissions[a].ybar.disk_coord(),
                               0.5 * eps * dir));
        worst_gap = std::max(worst_gap, hmm::q_value(pert, obs, post) - q0);
      }
      // scale block
      {
        hmm::HmmParams pert = hat.params;
        const int a = static_cast<int>(rng.uniform_index(s));
        double sig = pert.emissions[a].sigma *
                     std::exp(eps * (rng.uniform() < 0.5 ? -1.0 : 1.0));
        sig = std::min(std::max(sig, geometry::kSigmaRange.lo),
                       geometry::kSigmaRange.hi);
        pert.emissions[a].sigma = sig;
        worst_gap = std::max(worst_gap, hmm::q_value(pert, obs, post) - q0);
      }
    }

    // disk Frechet gradient at the returned means
    for (int a = 0; a < s; ++a) {
      std::complex<double> g{0.0, 0.0};
      double total = 0.0;
      const std::complex<double> y = hat.params.emissions[a].ybar.disk_coord();
      for (int t = 0; t < t_count; ++t) {
        g += post.omega(t, a) * numerics::disk_log(y, obs[t].disk_coord());
        total += post.omega(t, a);
      }
      worst_grad = std::max(
          worst_grad, numerics::disk_tangent_norm(y, 2.0 * g / total));
    }

    // vMF mean closed form on a companion spherical instance
    {
      std::vector<geometry::ManifoldPoint> sphere_obs;
      std::vector<double> w(t_count);
      Eigen::Vector3d resultant = Eigen::Vector3d::Zero();
      for (int t = 0; t < t_count; ++t) {
        Eigen::Vector3d v;
        for (int k = 0; k < 3; ++k) v[k] = rng.gaussian();
        v.normalize();
        sphere_obs.push_back(geometry::ManifoldPoint::sphere(v));
        w[t] = 0.1 + rng.uniform();
        resultant += w[t] * v;
      }
      const geometry::ManifoldPoint mean =
          numerics::weighted_frechet_mean(sphere_obs, w);
      worst_vmf = std::max(
          worst_vmf,
          (mean.sphere_coords() - resultant.normalized()).cwiseAbs().maxCoeff());
    }
  }

  OracleReport report;
  report.suite = "mstep-optimality";
  report.max_deviation = std::max(worst_gap, 0.0);
  report.pass =
      worst_gap <= 1e-9 && worst_grad < 1e-8 && worst_vmf < 1e-13;
  report.details = {{"worst_q_gap", worst_gap},
                    {"worst_frechet_gradient", worst_grad},
                    {"worst_vmf_mean_dev", worst_vmf},
                    {"instances", n_instances},
                    {"perturbations_per_block", n_perturbations}};
  return report;
}

// ---- exact Markov-field suite ----------------------------------------------

inline mrf::FieldParams random_disk_field(Rng& rng, int n_states) {
  mrf::FieldParams field;
  field.family = geometry::make_family("disk_gaussian", 2);
  field.V = Eigen::VectorXd::Zero(n_states);
  field.J = Eigen::MatrixXd::Zero(n_states, n_states);
  for (int a = 1; a < n_states; ++a) field.V[a] = 1.2 * (rng.uniform() - 0.5);
  for (int a = 0; a < n_states; ++a)
    for (int b = a; b < n_states; ++b)
      if (a + b > 0)
        field.J(a, b) = field.J(b, a) = 1.5 * (rng.uniform() - 0.3);
  for (int a = 0; a < n_states; ++a)
    field.emissions.push_back(
        hmm::Emission{random_disk_point(rng, 0.7), 0.3 + 0.4 * rng.uniform()});
  return field;
}

/// Full conditional P(q_z | rest) two ways: a ratio of joint probabilities
/// from global enumeration, and the local neighbor formula.
inline double markov_property_deviation(const mrf::FieldParams& field,
                                        const mrf::GridGraph& grid,
                                        Rng& rng) {
  const int s = field.n_states();
  const int n = grid.n_sites();
  std::vector<int> config(n);
  for (int z = 0; z < n; ++z)
    config[z] = static_cast<int>(rng.uniform_index(s));

  double max_dev = 0.0;
  for (int z = 0; z < n; ++z) {
    // global: P(q_z = a | rest) from the joint Gibbs weights
    Eigen::VectorXd joint(s);
    for (int a = 0; a < s; ++a) {
      std::vector<int> q = config;
      q[z] = a;
      joint[a] = mrf::detail::gibbs_energy(grid, field.V, field.J, q);
    }
    joint = (joint.array() - joint.maxCoeff()).exp();
    joint /= joint.sum();
    // local: neighbors only
    Eigen::VectorXd local(s);
    for (int a = 0; a < s; ++a) {
      double e = field.V[a];
      for (int w : grid.neighbors(z)) e += field.J(a, config[w]);
      local[a] = e;
    }
    local = (local.array() - local.maxCoeff()).exp();
    local /= local.sum();
    max_dev = std::max(max_dev, (joint - local).cwiseAbs().maxCoeff());
  }
  return max_dev;
}

/// Independent i.i.d. mixture EM (sitewise responsibilities), the reduction
/// oracle for a field fitted with its pair potentials frozen at zero.
struct MixtureEmState {
  Eigen::VectorXd weights;
  std::vector<hmm::Emission> emissions;
};

inline MixtureEmState mixture_em_fit(
    const geometry::LocationScaleFamily& family,
    const std::vector<geometry::ManifoldPoint>& obs,
    MixtureEmState state, int iterations) {
  const int s = static_cast<int>(state.emissions.size());
  const auto n = static_cast<Eigen::Index>(obs.size());
  for (int it = 0; it < iterations; ++it) {
    Eigen::MatrixXd resp(n, s);
    for (Eigen::Index z = 0; z < n; ++z) {
      Eigen::VectorXd lw(s);
      for (int a = 0; a < s; ++a)
        lw[a] = std::log(state.weights[a]) +
                family.log_density(obs[z], state.emissions[a].ybar,
                                   state.emissions[a].sigma);
      lw = (lw.array() - lw.maxCoeff()).exp();
      resp.row(z) = (lw / lw.sum()).transpose();
    }
    state.weights = resp.colwise().mean().transpose();
    std::vector<std::string> flags;
    hmm::update_emissions(family, obs, resp, state.emissions, flags, {}, {});
  }
  return state;
}

inline OracleReport mrf_exact_report(std::uint64_t seed = 20260810,
                                     int em_iterations = 20) {
  Rng master(seed ^ 0x3c3c'3c3cull);
  OracleReport report;
  report.suite = "mrf-exact";

  // (a) Markov property on a 2x3 grid
  double markov_dev = 0.0;
  {
    Rng rng = master.split(1);
    const mrf::GridGraph grid(2, 3);
    for (int rep = 0; rep < 10; ++rep) {
      const mrf::FieldParams field = random_disk_field(rng, 2);
      markov_dev =
          std::max(markov_dev, markov_property_deviation(field, grid, rng));
    }
  }

  // (b) EM monotonicity and (c) moment matching on 2x2 and 3x3 grids
  double min_increment = 0.0;
  double moment_dev = 0.0;
  for (int wh : {2, 3}) {
    Rng rng = master.split(100 + wh);
    const mrf::GridGraph grid(wh, wh);
    const mrf::FieldParams truth = random_disk_field(rng, 2);
    const sampling::FieldSimulation sim =
        sampling::simulate_field(truth, grid, rng.next_u64());

    mrf::FieldParams init = truth;
    init.V.setZero();
    init.J.setZero();
    init.emissions[0] = hmm::Emission{random_disk_point(rng, 0.5), 0.6};
    init.emissions[1] = hmm::Emission{random_disk_point(rng, 0.5), 0.6};

    mrf::FieldEmOptions opts;
    opts.max_iterations = em_iterations;
    opts.tolerance = 0.0;  // run all iterations
    const mrf::FieldEmResult fit = mrf::field_em_fit(init, grid, sim.obs, opts);
    std::vector<double> trace = fit.loglik_trace;
    trace.push_back(fit.final_loglik);
    for (std::size_t k = 1; k < trace.size(); ++k)
      min_increment = std::min(min_increment, trace[k] - trace[k - 1]);

    const mrf::FieldPosteriors post =
        mrf::field_posteriors_exact(fit.params, grid, sim.obs);
    const mrf::FieldMStepResult step =
        mrf::field_m_step(fit.params, grid, sim.obs, post);
    // model moments at the fitted potentials vs posterior targets
    const mrf::FieldPosteriors model_post = [&] {
      // moments of the Gibbs prior alone: enumerate with zero emissions
      mrf::FieldParams prior = step.params;
      std::vector<geometry::ManifoldPoint> dummy(
          sim.obs.size(), geometry::ManifoldPoint::disk(0.0));
      prior.emissions.assign(prior.emissions.size(),
                             hmm::Emission{geometry::ManifoldPoint::disk(0.0),
                                           1.0});
      // with identical emissions the posterior equals the prior
      return mrf::field_posteriors_exact(prior, grid, dummy);
    }();
    moment_dev = std::max(
        moment_dev, (model_post.omega - post.omega).cwiseAbs().maxCoeff());
    moment_dev = std::max(moment_dev,
                          (model_post.nu - post.nu).cwiseAbs().maxCoeff());
  }

  // (d) frozen-J reduction against the independent mixture EM
  double reduction_dev = 0.0;
  {
    Rng rng = master.split(500);
    const mrf::GridGraph grid(3, 3);
    mrf::FieldParams truth = random_disk_field(rng, 2);
    truth.J.setZero();
    const sampling::FieldSimulation sim =
        sampling::simulate_field(truth, grid, rng.next_u64());

    mrf::FieldParams init = truth;
    init.V.setZero();
    init.emissions[0] = hmm::Emission{random_disk_point(rng, 0.5), 0.6};
    init.emissions[1] = hmm::Emission{random_disk_point(rng, 0.5), 0.6};

    mrf::FieldEmOptions opts;
    opts.max_iterations = 10;
    opts.tolerance = 0.0;
    opts.freeze_pair_potentials = true;
    const mrf::FieldEmResult fit = mrf::field_em_fit(init, grid, sim.obs, opts);

    MixtureEmState mix;
    mix.weights = Eigen::VectorXd::Constant(2, 0.5);
    mix.emissions = init.emissions;
    mix = mixture_em_fit(*init.family, sim.obs, mix, 10);

    Eigen::VectorXd field_weights = fit.params.V;
    field_weights = (field_weights.array() - field_weights.maxCoeff()).exp();
    field_weights /= field_weights.sum();
    reduction_dev = (field_weights - mix.weights).cwiseAbs().maxCoeff();
    for (int a = 0; a < 2; ++a) {
      reduction_dev = std::max(
          reduction_dev,
          geometry::riemannian_distance(fit.params.emissions[a].ybar,
                                        mix.emissions[a].ybar));
      reduction_dev =
          std::max(reduction_dev, std::fabs(fit.params.emissions[a].sigma -
                                            mix.emissions[a].sigma));
    }
  }

  report.max_deviation =
      std::max({markov_dev, -min_increment, moment_dev, reduction_dev});
  report.pass = markov_dev < 1e-12 && min_increment >= -1e-9 &&
                moment_dev < 1e-6 && reduction_dev < 1e-8;
  report.details = {{"markov_property_dev", markov_dev},
                    {"min_loglik_increment", min_increment},
                    {"moment_matching_dev", moment_dev},
                    {"mixture_reduction_dev", reduction_dev},
                    {"em_iterations", em_iterations}};
  return report;
}

inline OracleReport run_oracle_suite(const std::string& name) {
  if (name == "fb-bruteforce") return fb_bruteforce_report();
  if (name == "normalizers") return normalizer_report();
  if (name == "mstep-optimality") return mstep_optimality_report();
  if (name == "mrf-exact") return mrf_exact_report();
  throw DomainError("unknown oracle suite: " + name);
}

inline json oracle_report_to_json(const OracleReport& report) {
  json j;
  j["suite"] = report.suite;
  j["pass"] = report.pass;
  j["max_deviation"] = report.max_deviation;
  j["details"] = report.details;
  return j;
}

}  // namespace mhmm::cli
