#pragma once

// The EM driver: alternate the exact E-step (forward-backward posteriors)
// and the closed-form-ish M-step until the largest parameter change drops
// below the tolerance. The loglik trace is recorded at every visited
// iterate and is nondecreasing up to rounding.

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "mhmm/errors.hpp"
#include "mhmm/hmm/forward_backward.hpp"
#include "mhmm/hmm/m_step.hpp"
#include "mhmm/hmm/params.hpp"
#include "mhmm/rng.hpp"

namespace mhmm::hmm {

struct EmOptions {
  int max_iterations = 300;
  double tolerance = 1e-6;
  numerics::FrechetConfig frechet;
  numerics::RootSolveConfig root;
};

struct EmResult {
  HmmParams params;
  std::vector<double> loglik_trace;  // loglik at each visited iterate
  double final_loglik = 0.0;         // loglik at the returned params
  int iterations = 0;
  std::vector<std::string> flags;
};

/// Largest blockwise change between iterates: transition entries and scales
/// by absolute value, locations by Riemannian distance.
inline double parameter_change(const HmmParams& a, const HmmParams& b) {
  double delta = (a.P - b.P).cwiseAbs().maxCoeff();
  for (int s = 0; s < a.n_states(); ++s) {
    delta = std::max(delta, geometry::riemannian_distance(
                                a.emissions[s].ybar, b.emissions[s].ybar));
    delta = std::max(delta,
                     std::fabs(a.emissions[s].sigma - b.emissions[s].sigma));
  }
  return delta;
}

inline EmResult em_fit(const HmmParams& params0,
                       const std::vector<geometry::ManifoldPoint>& obs,
                       const EmOptions& opts = {}) {
  params0.validate();
  if (opts.max_iterations < 1)
    throw DomainError("em_fit: max_iterations >= 1 required");

  EmResult result;
  result.params = params0;
  for (int k = 0; k < opts.max_iterations; ++k) {
    FbCache cache;
    Posteriors post;
    try {
      cache = forward_pass(result.params, obs);
      backward_pass(result.params, cache);
      post = posteriors_from_cache(result.params, cache);
    } catch (const DegeneracyError& e) {
      throw DegeneracyError("em iteration " + std::to_string(k + 1) + ": " +
                                e.what(),
                            k + 1);
    }
    result.loglik_trace.push_back(cache.loglik);

    MStepResult step = m_step(result.params, obs, post, opts.frechet,
                              opts.root);
    for (const std::string& f : step.flags)
      result.flags.push_back("iteration " + std::to_string(k + 1) + ": " + f);

    const double delta = parameter_change(result.params, step.params);
    result.params = std::move(step.params);
    result.iterations = k + 1;
    if (delta < opts.tolerance) break;
  }
  result.final_loglik = forward_pass(result.params, obs).loglik;
  return result;
}

/// Deterministic default initializer: uniform transition matrix and initial
/// law; locations and scales are read off a seeded geometric clustering of
/// the observations. Means of a uniformly random partition all collapse to
/// the global mean (EM then starts at a near-symmetric saddle), and plain
/// farthest-point seeding chases the stretched tails of the manifold metric
/// and can drop two seeds into one cluster; so the partition is built by
/// overseeding a farthest-point traversal with 2|S| centers, running a few
/// Lloyd rounds, then Ward-merging the centers down to |S| (tiny outlier
/// blocks are absorbed first). Deterministic given the seed.
inline HmmParams default_init(
    std::shared_ptr<const geometry::LocationScaleFamily> family,
    const std::vector<geometry::ManifoldPoint>& obs, int n_states,
    std::uint64_t seed) {
  if (n_states < 1) throw DomainError("default_init: need n_states >= 1");
  if (obs.size() < static_cast<std::size_t>(n_states))
    throw DomainError("default_init: fewer observations than states");

  Rng rng(seed, /*stream=*/0x1817);
  const int n_centers = static_cast<int>(
      std::min(obs.size(), static_cast<std::size_t>(2 * n_states)));

  // farthest-point overseeding
  std::vector<geometry::ManifoldPoint> centers;
  centers.push_back(obs[rng.uniform_index(obs.size())]);
  std::vector<double> min_dist(obs.size());
  for (std::size_t t = 0; t < obs.size(); ++t)
    min_dist[t] = geometry::riemannian_distance(obs[t], centers[0]);
  while (static_cast<int>(centers.size()) < n_centers) {
    std::size_t far = 0;
    for (std::size_t t = 1; t < obs.size(); ++t)
      if (min_dist[t] > min_dist[far]) far = t;
    centers.push_back(obs[far]);
    for (std::size_t t = 0; t < obs.size(); ++t)
      min_dist[t] = std::min(min_dist[t],
                             geometry::riemannian_distance(obs[t], centers.back()));
  }

  std::vector<int> assign(obs.size(), 0);
  std::vector<double> mass;
  auto reassign = [&] {
    for (std::size_t t = 0; t < obs.size(); ++t) {
      int nearest = 0;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < centers.size(); ++a) {
        const double d = geometry::riemannian_distance(obs[t], centers[a]);
        if (d < best) {
          best = d;
          nearest = static_cast<int>(a);
        }
      }
      assign[t] = nearest;
    }
  };
  auto recenter = [&] {
    mass.assign(centers.size(), 0.0);
    std::vector<std::vector<double>> w(centers.size(),
                                       std::vector<double>(obs.size(), 0.0));
    for (std::size_t t = 0; t < obs.size(); ++t) {
      w[assign[t]][t] = 1.0;
      mass[assign[t]] += 1.0;
    }
    for (std::size_t a = 0; a < centers.size(); ++a)
      if (mass[a] > 0.0)
        centers[a] = numerics::weighted_frechet_mean(obs, w[a]);
  };

  for (int round = 0; round < 4; ++round) {
    reassign();
    recenter();
  }

  // Ward merges: cost (m_a m_b / (m_a + m_b)) d^2(c_a, c_b)
  while (static_cast<int>(centers.size()) > n_states) {
    std::size_t best_a = 0, best_b = 1;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < centers.size(); ++a) {
      for (std::size_t b = a + 1; b < centers.size(); ++b) {
        const double d = geometry::riemannian_distance(centers[a], centers[b]);
        const double denom = mass[a] + mass[b];
        const double cost =
            denom > 0.0 ? (mass[a] * mass[b] / denom) * d * d : 0.0;
        if (cost < best_cost) {
          best_cost = cost;
          best_a = a;
          best_b = b;
        }
      }
    }
    for (std::size_t t = 0; t < obs.size(); ++t) {
      if (assign[t] == static_cast<int>(best_b)) assign[t] = static_cast<int>(best_a);
      if (assign[t] == static_cast<int>(centers.size()) - 1)
        assign[t] = static_cast<int>(best_b);
    }
    centers[best_b] = centers.back();
    mass[best_b] = mass.back();
    centers.pop_back();
    mass.pop_back();
    recenter();
  }
  reassign();

  HmmParams params;
  params.family = std::move(family);
  params.P = Eigen::MatrixXd::Constant(n_states, n_states, 1.0 / n_states);
  params.pi1 = Eigen::VectorXd::Constant(n_states, 1.0 / n_states);
  params.emissions.assign(n_states, Emission{obs.front(), 1.0});
  Eigen::MatrixXd weights =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(obs.size()), n_states);
  for (std::size_t t = 0; t < obs.size(); ++t)
    weights(static_cast<Eigen::Index>(t), assign[t]) = 1.0;
  std::vector<std::string> flags;
  update_emissions(*params.family, obs, weights, params.emissions, flags,
                   {}, {});
  params.validate();
  return params;
}

/// Permutation of estimated states minimizing the total Riemannian distance
/// between estimated and reference locations (EM is label-symmetric).
inline std::vector<int> best_label_permutation(
    const HmmParams& estimate, const std::vector<Emission>& reference) {
  const int s = estimate.n_states();
  if (static_cast<int>(reference.size()) != s)
    throw DomainError("label alignment: state count mismatch");
  std::vector<int> perm(s), best(s);
  std::iota(perm.begin(), perm.end(), 0);
  best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (int a = 0; a < s; ++a)
      cost += geometry::riemannian_distance(estimate.emissions[perm[a]].ybar,
                                            reference[a].ybar);
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Relabel states so state a of the result corresponds to reference state a.
inline HmmParams align_labels(const HmmParams& estimate,
                              const std::vector<Emission>& reference) {
  const std::vector<int> perm = best_label_permutation(estimate, reference);
  const int s = estimate.n_states();
  HmmParams out = estimate;
  for (int a = 0; a < s; ++a) {
    out.pi1[a] = estimate.pi1[perm[a]];
    out.emissions[a] = estimate.emissions[perm[a]];
    for (int b = 0; b < s; ++b) out.P(a, b) = estimate.P(perm[a], perm[b]);
  }
  return out;
}

}  // namespace mhmm::hmm
