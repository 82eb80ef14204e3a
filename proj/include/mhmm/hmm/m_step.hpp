#pragma once

// The M-step: row-normalized expected transition counts, weighted Frechet
// means per state, and the scale from inverting psi' at the weighted mean
// statistic. States that receive (numerically) no posterior weight keep
// their previous parameters and are flagged instead of aborting the run.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mhmm/hmm/forward_backward.hpp"
#include "mhmm/hmm/params.hpp"
#include "mhmm/numerics/frechet.hpp"
#include "mhmm/numerics/root_solve.hpp"

namespace mhmm::hmm {

struct MStepResult {
  HmmParams params;
  std::vector<std::string> flags;
};

/// Shared emission update (also the per-site update of the Markov-field
/// M-step): for each state, a weighted Frechet mean and a psi' inversion at
/// the weighted mean statistic. `weights` is T x S.
inline void update_emissions(const geometry::LocationScaleFamily& family,
                             const std::vector<geometry::ManifoldPoint>& obs,
                             const Eigen::MatrixXd& weights,
                             std::vector<Emission>& emissions,
                             std::vector<std::string>& flags,
                             const numerics::FrechetConfig& frechet_cfg,
                             const numerics::RootSolveConfig& root_cfg) {
  const int s = static_cast<int>(emissions.size());
  const auto t_count = static_cast<Eigen::Index>(obs.size());
  for (int a = 0; a < s; ++a) {
    std::vector<double> w(t_count);
    double total = 0.0;
    for (Eigen::Index t = 0; t < t_count; ++t) {
      w[t] = weights(t, a);
      total += w[t];
    }
    if (total < 1e-12) {
      flags.push_back("state " + std::to_string(a + 1) +
                      ": no posterior weight, emission kept");
      continue;
    }
    geometry::ManifoldPoint mean =
        numerics::weighted_frechet_mean(obs, w, frechet_cfg);
    double target = 0.0;
    for (Eigen::Index t = 0; t < t_count; ++t)
      target += w[t] * family.statistic(obs[t], mean);
    target /= total;
    const numerics::RootSolveResult sol =
        numerics::inverse_psi_prime(family, target, root_cfg);
    if (sol.clamped)
      flags.push_back("state " + std::to_string(a + 1) +
                      ": scale clamped at the admissible boundary");
    emissions[a] = Emission{std::move(mean), family.sigma_from_eta(sol.eta)};
  }
}

inline MStepResult m_step(const HmmParams& prev,
                          const std::vector<geometry::ManifoldPoint>& obs,
                          const Posteriors& post,
                          const numerics::FrechetConfig& frechet_cfg = {},
                          const numerics::RootSolveConfig& root_cfg = {}) {
  const int s = prev.n_states();
  MStepResult result;
  result.params = prev;

  for (int a = 0; a < s; ++a) {
    const double row = post.nu.row(a).sum();
    if (row < 1e-12) {
      result.flags.push_back("state " + std::to_string(a + 1) +
                             ": zero expected transition row, P row kept");
      continue;
    }
    result.params.P.row(a) = post.nu.row(a) / row;
  }

  // pi1 := omega^1. The pi1 term is dropped from the maximized objective, so
  // this assignment is free; it keeps the model a proper density.
  result.params.pi1 = post.omega.row(0).transpose();

  update_emissions(*prev.family, obs, post.omega, result.params.emissions,
                   result.flags, frechet_cfg, root_cfg);
  return result;
}

/// Q(theta) = sum nu log P + sum_t sum_alpha omega log f. The quantity the
/// M-step maximizes; exposed for the optimality checks.
inline double q_value(const HmmParams& params,
                      const std::vector<geometry::ManifoldPoint>& obs,
                      const Posteriors& post) {
  const int s = params.n_states();
  double q = 0.0;
  for (int a = 0; a < s; ++a) {
    for (int b = 0; b < s; ++b) {
      if (post.nu(a, b) == 0.0) continue;
      if (params.P(a, b) <= 0.0)
        return -std::numeric_limits<double>::infinity();
      q += post.nu(a, b) * std::log(params.P(a, b));
    }
  }
  std::vector<double> eta(s), psi(s);
  for (int a = 0; a < s; ++a) {
    eta[a] = params.family->checked_eta(params.emissions[a].sigma);
    psi[a] = params.family->log_partition(eta[a]);
  }
  for (std::size_t t = 0; t < obs.size(); ++t) {
    for (int a = 0; a < s; ++a) {
      const double d =
          params.family->statistic(obs[t], params.emissions[a].ybar);
      q += post.omega(static_cast<Eigen::Index>(t), a) * (eta[a] * d - psi[a]);
    }
  }
  return q;
}

}  // namespace mhmm::hmm
