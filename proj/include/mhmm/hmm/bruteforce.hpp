#pragma once

// Exact small-case references by path enumeration: the observed-data
// log-likelihood
//
//   l(y|theta) = log sum_{q_1..q_T} pi_1(q_1) prod P_{q_t q_{t+1}}
//                prod f(y_t | q_t)
//
// and the exact state / pair posteriors it induces. Independent of the
// forward-backward code path; the recursions are validated against these.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mhmm/errors.hpp"
#include "mhmm/hmm/forward_backward.hpp"
#include "mhmm/hmm/params.hpp"

namespace mhmm::hmm {

namespace detail {

inline void check_enumeration_guard(int n_states, std::size_t t_count) {
  double paths = 1.0;
  for (std::size_t t = 0; t < t_count; ++t) {
    paths *= n_states;
    if (paths > 1e6)
      throw EnumerationGuardError(
          "path enumeration guard exceeded: |S|^T > 1e6");
  }
}

// Calls visit(path, log_weight) for every hidden path.
template <typename Visit>
void enumerate_paths(const HmmParams& params,
                     const std::vector<geometry::ManifoldPoint>& obs,
                     Visit&& visit) {
  const int s = params.n_states();
  const std::size_t t_count = obs.size();
  check_enumeration_guard(s, t_count);

  Eigen::MatrixXd logf(t_count, s);
  for (std::size_t t = 0; t < t_count; ++t)
    for (int a = 0; a < s; ++a)
      logf(static_cast<Eigen::Index>(t), a) = params.family->log_density(
          obs[t], params.emissions[a].ybar, params.emissions[a].sigma);

  const double neg_inf = -std::numeric_limits<double>::infinity();
  std::vector<int> path(t_count, 0);
  while (true) {
    double w = params.pi1[path[0]] > 0.0 ? std::log(params.pi1[path[0]])
                                         : neg_inf;
    w += logf(0, path[0]);
    for (std::size_t t = 0; t + 1 < t_count; ++t) {
      const double p = params.P(path[t], path[t + 1]);
      w += (p > 0.0 ? std::log(p) : neg_inf) +
           logf(static_cast<Eigen::Index>(t + 1), path[t + 1]);
    }
    visit(path, w);
    std::size_t k = 0;
    for (; k < t_count; ++k) {
      if (++path[k] < s) break;
      path[k] = 0;
    }
    if (k == t_count) break;
  }
}

}  // namespace detail

inline double bruteforce_loglik(
    const HmmParams& params,
    const std::vector<geometry::ManifoldPoint>& obs) {
  params.validate();
  if (obs.empty()) throw DomainError("bruteforce_loglik: empty observations");
  std::vector<double> logw;
  detail::enumerate_paths(params, obs,
                          [&](const std::vector<int>&, double w) {
                            logw.push_back(w);
                          });
  const double m = *std::max_element(logw.begin(), logw.end());
  if (!std::isfinite(m)) return m;
  double sum = 0.0;
  for (double w : logw) sum += std::exp(w - m);
  return m + std::log(sum);
}

/// Exact posteriors by enumeration (the Appendix-style Bayes reference).
inline Posteriors bruteforce_posteriors(
    const HmmParams& params,
    const std::vector<geometry::ManifoldPoint>& obs) {
  params.validate();
  if (obs.empty())
    throw DomainError("bruteforce_posteriors: empty observations");
  const int s = params.n_states();
  const auto t_count = static_cast<Eigen::Index>(obs.size());

  std::vector<std::vector<int>> paths;
  std::vector<double> logw;
  detail::enumerate_paths(params, obs,
                          [&](const std::vector<int>& path, double w) {
                            paths.push_back(path);
                            logw.push_back(w);
                          });
  const double m = *std::max_element(logw.begin(), logw.end());
  if (!std::isfinite(m))
    throw DegeneracyError("bruteforce_posteriors: zero total likelihood", 0);

  Posteriors post;
  post.omega = Eigen::MatrixXd::Zero(t_count, s);
  post.nu = Eigen::MatrixXd::Zero(s, s);
  double total = 0.0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const double w = std::exp(logw[i] - m);
    total += w;
    for (Eigen::Index t = 0; t < t_count; ++t)
      post.omega(t, paths[i][t]) += w;
    for (Eigen::Index t = 0; t + 1 < t_count; ++t)
      post.nu(paths[i][t], paths[i][t + 1]) += w;
  }
  post.omega /= total;
  post.nu /= total;
  return post;
}

/// l(x|theta) for complete data: transition-count term plus emission term
/// (the pi_1 term is dropped as statistically insignificant for large T).
/// A path using a zero-probability transition yields -infinity.
inline double complete_loglik(const HmmParams& params,
                              const CompleteData& data) {
  params.validate();
  if (data.path.size() != data.obs.size() || data.path.empty())
    throw DomainError("complete_loglik: path/observation length mismatch");
  const double neg_inf = -std::numeric_limits<double>::infinity();
  double l = 0.0;
  for (std::size_t t = 0; t + 1 < data.path.size(); ++t) {
    const double p = params.P(data.path[t], data.path[t + 1]);
    if (p <= 0.0) return neg_inf;
    l += std::log(p);
  }
  for (std::size_t t = 0; t < data.path.size(); ++t) {
    const Emission& e = params.emissions[data.path[t]];
    l += params.family->log_density(data.obs[t], e.ybar, e.sigma);
  }
  return l;
}

}  // namespace mhmm::hmm
