#pragma once

// Normalized forward-backward recursions. The forward variable is the
// filtering distribution Phi_t(alpha) = P(q_t = alpha | y_1..y_t); the
// backward variable satisfies B_T = 1 and
//
//   B_t(alpha) = c_{t+1}^{-1} sum_beta P_{alpha beta} f(y_{t+1}|beta)
//                B_{t+1}(beta)
//
// where c_{t+1} = p(y_{t+1} | y_1..y_t) is the forward normalizer of step
// t+1 (and c_1 the normalizer of the initial condition). This indexing is
// pinned by the identity sum_alpha Phi_t(alpha) B_t(alpha) = 1 for all t,
// and is verified against path enumeration in the tests. The observed-data
// log-likelihood is sum_t log c_t.
//
// Emission densities are evaluated in log space once, and exponentiated
// after a per-time max subtraction inside the recursions, so the recursion
// never underflows as long as one state explains each observation.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mhmm/errors.hpp"
#include "mhmm/hmm/params.hpp"

namespace mhmm::hmm {

struct FbCache {
  Eigen::MatrixXd phi;        // T x S filtering distributions
  Eigen::MatrixXd b;          // T x S backward variables (empty until filled)
  Eigen::VectorXd log_norm;   // T log-normalizers log c_t
  Eigen::MatrixXd logf;       // T x S emission log-densities
  Eigen::VectorXd row_max;    // per-t max of logf
  Eigen::VectorXd norm_tilde; // shifted normalizers c_t / e^{row_max(t)}
  double loglik = 0.0;
};

struct Posteriors {
  Eigen::MatrixXd omega;  // T x S smoothed weights, rows sum to 1
  Eigen::MatrixXd nu;     // S x S expected transition counts, sums to T-1
};

/// Emission log-density table logf(t, alpha) = log f(y_t | ybar_a, sigma_a).
inline void emission_log_densities(const HmmParams& params,
                                   const std::vector<geometry::ManifoldPoint>& obs,
                                   FbCache& cache) {
  const int s = params.n_states();
  const auto t_count = static_cast<Eigen::Index>(obs.size());
  cache.logf.resize(t_count, s);
  cache.row_max.resize(t_count);
  std::vector<double> eta(s), psi(s);
  for (int a = 0; a < s; ++a) {
    eta[a] = params.family->checked_eta(params.emissions[a].sigma);
    psi[a] = params.family->log_partition(eta[a]);
  }
  for (Eigen::Index t = 0; t < t_count; ++t) {
    double m = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < s; ++a) {
      const double d =
          params.family->statistic(obs[t], params.emissions[a].ybar);
      cache.logf(t, a) = eta[a] * d - psi[a];
      m = std::max(m, cache.logf(t, a));
    }
    cache.row_max[t] = m;
  }
}

inline FbCache forward_pass(const HmmParams& params,
                            const std::vector<geometry::ManifoldPoint>& obs) {
  params.validate();
  if (obs.empty()) throw DomainError("forward_pass: empty observation list");
  const int s = params.n_states();
  const auto t_count = static_cast<Eigen::Index>(obs.size());

  FbCache cache;
  emission_log_densities(params, obs, cache);
  cache.phi.resize(t_count, s);
  cache.log_norm.resize(t_count);
  cache.norm_tilde.resize(t_count);

  auto degenerate = [](Eigen::Index t) {
    return DegeneracyError(
        "forward recursion degenerated at t = " + std::to_string(t + 1) +
            " (all emission densities vanished)",
        t + 1);
  };

  double norm = 0.0;
  for (int a = 0; a < s; ++a) {
    cache.phi(0, a) =
        params.pi1[a] * std::exp(cache.logf(0, a) - cache.row_max[0]);
    norm += cache.phi(0, a);
  }
  if (!(norm > 0.0) || !std::isfinite(norm)) throw degenerate(0);
  cache.phi.row(0) /= norm;
  cache.norm_tilde[0] = norm;
  cache.log_norm[0] = cache.row_max[0] + std::log(norm);

  for (Eigen::Index t = 0; t + 1 < t_count; ++t) {
    norm = 0.0;
    for (int b = 0; b < s; ++b) {
      double a_b = 0.0;
      for (int a = 0; a < s; ++a) a_b += cache.phi(t, a) * params.P(a, b);
      const double w =
          a_b * std::exp(cache.logf(t + 1, b) - cache.row_max[t + 1]);
      cache.phi(t + 1, b) = w;
      norm += w;
    }
    if (!(norm > 0.0) || !std::isfinite(norm)) throw degenerate(t + 1);
    cache.phi.row(t + 1) /= norm;
    cache.norm_tilde[t + 1] = norm;
    cache.log_norm[t + 1] = cache.row_max[t + 1] + std::log(norm);
  }
  cache.loglik = cache.log_norm.sum();
  return cache;
}

/// Fills cache.b given a completed forward pass over the same observations.
inline void backward_pass(const HmmParams& params, FbCache& cache) {
  const int s = params.n_states();
  const Eigen::Index t_count = cache.phi.rows();
  if (t_count == 0 || cache.logf.rows() != t_count)
    throw DomainError("backward_pass: cache does not match a forward pass");
  cache.b.resize(t_count, s);
  cache.b.row(t_count - 1).setOnes();
  for (Eigen::Index t = t_count - 2; t >= 0; --t) {
    for (int a = 0; a < s; ++a) {
      double sum = 0.0;
      for (int b = 0; b < s; ++b)
        sum += params.P(a, b) *
               std::exp(cache.logf(t + 1, b) - cache.row_max[t + 1]) *
               cache.b(t + 1, b);
      cache.b(t, a) = sum / cache.norm_tilde[t + 1];
    }
  }
}

/// Smoothed weights omega and expected pair counts nu (the E-step output).
inline Posteriors posteriors_from_cache(const HmmParams& params,
                                        const FbCache& cache) {
  const int s = params.n_states();
  const Eigen::Index t_count = cache.phi.rows();
  if (cache.b.rows() != t_count)
    throw DomainError("posteriors: backward pass missing");
  Posteriors post;
  post.omega = cache.phi.cwiseProduct(cache.b);
  post.nu = Eigen::MatrixXd::Zero(s, s);
  for (Eigen::Index t = 0; t + 1 < t_count; ++t) {
    for (int a = 0; a < s; ++a) {
      for (int b = 0; b < s; ++b) {
        post.nu(a, b) += cache.phi(t, a) * params.P(a, b) *
                         std::exp(cache.logf(t + 1, b) - cache.row_max[t + 1]) *
                         cache.b(t + 1, b) / cache.norm_tilde[t + 1];
      }
    }
  }
  return post;
}

inline Posteriors posteriors(const HmmParams& params,
                             const std::vector<geometry::ManifoldPoint>& obs) {
  FbCache cache = forward_pass(params, obs);
  backward_pass(params, cache);
  return posteriors_from_cache(params, cache);
}

}  // namespace mhmm::hmm
