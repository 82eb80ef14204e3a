#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "mhmm/hmm/bruteforce.hpp"
#include "mhmm/hmm/em.hpp"
#include "mhmm/hmm/forward_backward.hpp"
#include "mhmm/hmm/m_step.hpp"
#include "mhmm/sampling/samplers.hpp"
#include "support/test_support.hpp"

using namespace mhmm;
using namespace mhmm::hmm;
using Catch::Approx;
using geometry::ManifoldPoint;

namespace {

HmmParams tiny_disk_model(int n_states) {
  HmmParams p;
  p.family = geometry::make_family("disk_gaussian", 2);
  p.P = Eigen::MatrixXd::Constant(n_states, n_states, 1.0 / n_states);
  p.pi1 = Eigen::VectorXd::Constant(n_states, 1.0 / n_states);
  for (int a = 0; a < n_states; ++a) {
    const double angle = 2.0 * M_PI * a / n_states;
    p.emissions.push_back(Emission{
        ManifoldPoint::disk({0.5 * std::cos(angle), 0.5 * std::sin(angle)}),
        0.3 + 0.1 * a});
  }
  return p;
}

std::vector<ManifoldPoint> take(const std::vector<ManifoldPoint>& v, int n) {
  return {v.begin(), v.begin() + n};
}

}  // namespace

TEST_CASE("params validation") {
  HmmParams p = tiny_disk_model(2);
  REQUIRE_NOTHROW(p.validate());
  p.P(0, 0) = 0.6;  // row no longer sums to 1
  REQUIRE_THROWS_AS(p.validate(), DomainError);
  p = tiny_disk_model(2);
  p.pi1[0] = -0.1;
  p.pi1[1] = 1.1;
  REQUIRE_THROWS_AS(p.validate(), DomainError);
  p = tiny_disk_model(2);
  p.emissions[0].sigma = 1e-6;
  REQUIRE_THROWS_AS(p.validate(), DomainError);
}

TEST_CASE("forward pass: single state and T = 1") {
  SECTION("|S| = 1: phi is 1, loglik is the emission sum") {
    HmmParams p = tiny_disk_model(1);
    const auto sim = sampling::simulate_hmm(p, 20, 5);
    const FbCache cache = forward_pass(p, sim.obs);
    double expected = 0.0;
    for (const auto& y : sim.obs)
      expected +=
          p.family->log_density(y, p.emissions[0].ybar, p.emissions[0].sigma);
    REQUIRE(cache.loglik == Approx(expected).epsilon(1e-13));
    for (Eigen::Index t = 0; t < cache.phi.rows(); ++t)
      REQUIRE(cache.phi(t, 0) == 1.0);
  }
  SECTION("T = 1: phi_1 proportional to pi f, loglik = log sum") {
    HmmParams p = tiny_disk_model(2);
    p.pi1 << 0.3, 0.7;
    const std::vector<ManifoldPoint> obs = {ManifoldPoint::disk({0.45, 0.0})};
    const FbCache cache = forward_pass(p, obs);
    Eigen::Vector2d w;
    for (int a = 0; a < 2; ++a)
      w[a] = p.pi1[a] * std::exp(p.family->log_density(
                            obs[0], p.emissions[a].ybar, p.emissions[a].sigma));
    REQUIRE(cache.phi(0, 0) == Approx(w[0] / w.sum()).epsilon(1e-13));
    REQUIRE(cache.loglik == Approx(std::log(w.sum())).epsilon(1e-13));
  }
}

TEST_CASE("forward/backward vs path enumeration") {
  Rng rng(808);
  double max_dev = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const int s = 2 + static_cast<int>(rng.uniform_index(2));
    const int t_count = 3 + static_cast<int>(rng.uniform_index(5));
    HmmParams p = tiny_disk_model(s);
    // randomize the transition rows and initial law
    for (int a = 0; a < s; ++a) {
      Eigen::VectorXd row(s);
      for (int b = 0; b < s; ++b) row[b] = 0.2 + rng.uniform();
      p.P.row(a) = (row / row.sum()).transpose();
    }
    p.pi1.setConstant(1.0 / s);
    const auto sim = sampling::simulate_hmm(p, t_count, rng.next_u64());

    FbCache cache = forward_pass(p, sim.obs);
    backward_pass(p, cache);
    const Posteriors fast = posteriors_from_cache(p, cache);
    const Posteriors exact = bruteforce_posteriors(p, sim.obs);
    max_dev = std::max(max_dev, std::fabs(cache.loglik -
                                          bruteforce_loglik(p, sim.obs)));
    max_dev = std::max(max_dev,
                       (fast.omega - exact.omega).cwiseAbs().maxCoeff());
    max_dev = std::max(max_dev, (fast.nu - exact.nu).cwiseAbs().maxCoeff());
    // terminal condition and normalization invariants
    for (int a = 0; a < s; ++a) REQUIRE(cache.b(t_count - 1, a) == 1.0);
    for (Eigen::Index t = 0; t < t_count; ++t) {
      REQUIRE(cache.phi.row(t).sum() == Approx(1.0).margin(1e-10));
      REQUIRE(cache.phi.row(t).dot(cache.b.row(t)) ==
              Approx(1.0).margin(1e-10));
      REQUIRE(fast.omega.row(t).sum() == Approx(1.0).margin(1e-10));
    }
    REQUIRE(fast.nu.sum() == Approx(t_count - 1.0).margin(1e-8));
  }
  REQUIRE(max_dev < 1e-10);
}

TEST_CASE("posteriors: deterministic chain locks onto state 1") {
  HmmParams p = tiny_disk_model(2);
  p.P << 1.0, 0.0, 0.0, 1.0;
  p.pi1 << 1.0, 0.0;
  p.emissions[0] = Emission{ManifoldPoint::disk({0.0, 0.0}), 0.1};
  p.emissions[1] = Emission{ManifoldPoint::disk({0.0, 0.9}), 0.1};
  const auto sim = sampling::simulate_hmm(p, 30, 17);
  const Posteriors post = posteriors(p, sim.obs);
  for (Eigen::Index t = 0; t < 30; ++t)
    REQUIRE(post.omega(t, 0) == Approx(1.0).margin(1e-6));
}

TEST_CASE("posteriors: T = 2 hand Bayes computation") {
  HmmParams p = tiny_disk_model(2);
  p.P << 0.7, 0.3, 0.4, 0.6;
  p.pi1 << 0.55, 0.45;
  const std::vector<ManifoldPoint> obs = {ManifoldPoint::disk({0.3, 0.2}),
                                          ManifoldPoint::disk({-0.2, 0.4})};
  auto f = [&](int t, int a) {
    return std::exp(p.family->log_density(obs[t], p.emissions[a].ybar,
                                          p.emissions[a].sigma));
  };
  // the four path weights
  Eigen::Matrix2d joint;
  double total = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      joint(a, b) = p.pi1[a] * f(0, a) * p.P(a, b) * f(1, b);
      total += joint(a, b);
    }
  joint /= total;
  const Posteriors post = posteriors(p, obs);
  REQUIRE((post.nu - joint).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE(post.omega(0, 0) == Approx(joint(0, 0) + joint(0, 1)).margin(1e-12));
  REQUIRE(post.omega(1, 0) == Approx(joint(0, 0) + joint(1, 0)).margin(1e-12));
}

TEST_CASE("forward degeneracy is reported with its time index") {
  HmmParams p = tiny_disk_model(2);
  p.P << 1.0, 0.0, 0.0, 1.0;
  p.pi1 << 1.0, 0.0;
  p.emissions[0] = Emission{ManifoldPoint::disk({0.0, 0.0}), 1e-4};
  p.emissions[1] = Emission{ManifoldPoint::disk({0.0, 0.9}), 1e-4};
  // second observation is impossibly far from state 1 at this scale, and the
  // deterministic chain forbids switching
  const std::vector<ManifoldPoint> obs = {ManifoldPoint::disk({0.0, 0.0}),
                                          ManifoldPoint::disk({0.0, 0.9})};
  try {
    forward_pass(p, obs);
    FAIL("expected DegeneracyError");
  } catch (const DegeneracyError& e) {
    REQUIRE(e.index() == 2);
  }
}

TEST_CASE("m_step: transition rows from expected counts") {
  HmmParams prev = tiny_disk_model(2);
  Posteriors post;
  post.omega = Eigen::MatrixXd::Constant(5, 2, 0.5);
  post.nu.resize(2, 2);
  post.nu << 3.0, 1.0, 2.0, 2.0;
  std::vector<ManifoldPoint> obs;
  Rng rng(9);
  for (int t = 0; t < 5; ++t)
    obs.push_back(test_support::random_point(geometry::Manifold::Disk, 2, rng));
  const MStepResult res = m_step(prev, obs, post);
  REQUIRE(res.params.P(0, 0) == Approx(0.75).margin(1e-15));
  REQUIRE(res.params.P(0, 1) == Approx(0.25).margin(1e-15));
  REQUIRE(res.params.P(1, 0) == Approx(0.5).margin(1e-15));
  REQUIRE(res.params.P(1, 1) == Approx(0.5).margin(1e-15));
  // pi1 := omega^1
  REQUIRE(res.params.pi1[0] == Approx(post.omega(0, 0)).margin(1e-15));
}

TEST_CASE("m_step: all weight on one observation clamps the scale") {
  HmmParams prev = tiny_disk_model(2);
  const int t_count = 6;
  std::vector<ManifoldPoint> obs;
  Rng rng(10);
  for (int t = 0; t < t_count; ++t)
    obs.push_back(test_support::random_point(geometry::Manifold::Disk, 2, rng));
  Posteriors post;
  post.omega = Eigen::MatrixXd::Zero(t_count, 2);
  post.omega(2, 0) = 1.0;  // state 1: a single supported observation
  for (int t = 0; t < t_count; ++t) post.omega(t, 1) = 1.0;
  post.nu = Eigen::MatrixXd::Constant(2, 2, 1.0);
  const MStepResult res = m_step(prev, obs, post);
  REQUIRE(geometry::riemannian_distance(res.params.emissions[0].ybar, obs[2]) <
          1e-9);
  REQUIRE(res.params.emissions[0].sigma == geometry::kSigmaRange.lo);
  REQUIRE_FALSE(res.flags.empty());
}

TEST_CASE("m_step: empty state and zero transition row keep previous values") {
  HmmParams prev = tiny_disk_model(2);
  const int t_count = 5;
  std::vector<ManifoldPoint> obs;
  Rng rng(11);
  for (int t = 0; t < t_count; ++t)
    obs.push_back(test_support::random_point(geometry::Manifold::Disk, 2, rng));
  Posteriors post;
  post.omega = Eigen::MatrixXd::Zero(t_count, 2);
  for (int t = 0; t < t_count; ++t) post.omega(t, 1) = 1.0;
  post.nu.resize(2, 2);
  post.nu << 0.0, 0.0, 1.0, 3.0;
  const MStepResult res = m_step(prev, obs, post);
  REQUIRE(res.params.P.row(0) == prev.P.row(0));
  REQUIRE(geometry::riemannian_distance(res.params.emissions[0].ybar,
                                        prev.emissions[0].ybar) < 1e-15);
  REQUIRE(res.params.emissions[0].sigma == prev.emissions[0].sigma);
  REQUIRE(res.flags.size() >= 2);
}

TEST_CASE("m_step consistency: uniform weights recover the generating scale") {
  const auto family = geometry::make_family("disk_gaussian", 2);
  const int t_count = 10000;
  Rng rng(2025);
  sampling::EmissionSampler emit(
      family, {Emission{ManifoldPoint::disk(0.0), 0.4}});
  std::vector<ManifoldPoint> obs;
  for (int t = 0; t < t_count; ++t) obs.push_back(emit(0, rng));

  HmmParams prev = tiny_disk_model(1);
  Posteriors post;
  post.omega = Eigen::MatrixXd::Ones(t_count, 1);
  post.nu = Eigen::MatrixXd::Constant(1, 1, t_count - 1.0);
  const MStepResult res = m_step(prev, obs, post);
  REQUIRE(res.params.emissions[0].sigma == Approx(0.4).margin(0.02));
  REQUIRE(geometry::riemannian_distance(res.params.emissions[0].ybar,
                                        ManifoldPoint::disk(0.0)) < 0.05);
}

TEST_CASE("m_step scale invariance in the weights") {
  HmmParams prev = tiny_disk_model(2);
  Rng rng(77);
  const int t_count = 40;
  std::vector<ManifoldPoint> obs;
  for (int t = 0; t < t_count; ++t)
    obs.push_back(test_support::random_point(geometry::Manifold::Disk, 2, rng));
  Posteriors post;
  post.omega.resize(t_count, 2);
  for (int t = 0; t < t_count; ++t) {
    post.omega(t, 0) = 0.1 + rng.uniform();
    post.omega(t, 1) = 0.1 + rng.uniform();
  }
  post.nu = Eigen::MatrixXd::Constant(2, 2, 1.0);
  Posteriors scaled = post;
  scaled.omega *= 7.5;
  const MStepResult a = m_step(prev, obs, post);
  const MStepResult b = m_step(prev, obs, scaled);
  for (int s = 0; s < 2; ++s) {
    REQUIRE(geometry::riemannian_distance(a.params.emissions[s].ybar,
                                          b.params.emissions[s].ybar) < 1e-9);
    REQUIRE(a.params.emissions[s].sigma ==
            Approx(b.params.emissions[s].sigma).epsilon(1e-9));
  }
}

TEST_CASE("Q is concave in eta along a grid") {
  HmmParams params = tiny_disk_model(2);
  Rng rng(3333);
  const int t_count = 30;
  std::vector<ManifoldPoint> obs;
  for (int t = 0; t < t_count; ++t)
    obs.push_back(test_support::random_point(geometry::Manifold::Disk, 2, rng));
  Posteriors post;
  post.omega.resize(t_count, 2);
  for (int t = 0; t < t_count; ++t) {
    post.omega(t, 0) = 0.2 + rng.uniform();
    post.omega(t, 1) = 0.2 + rng.uniform();
  }
  post.nu = Eigen::MatrixXd::Constant(2, 2, 1.0);

  // Q as a function of eta(sigma_0), everything else fixed
  std::vector<double> qs;
  for (int i = 0; i <= 20; ++i) {
    const double eta = -6.0 + 5.6 * i / 20.0;
    HmmParams p = params;
    p.emissions[0].sigma = p.family->sigma_from_eta(eta);
    qs.push_back(q_value(p, obs, post));
  }
  for (std::size_t i = 1; i + 1 < qs.size(); ++i)
    REQUIRE(qs[i + 1] - 2.0 * qs[i] + qs[i - 1] <= 1e-9);
}

TEST_CASE("em_fit: loglik trace is nondecreasing on simulated data") {
  Rng rng(15);
  HmmParams truth = tiny_disk_model(3);
  const auto sim = sampling::simulate_hmm(truth, 500, 9001);
  for (int init_rep = 0; init_rep < 3; ++init_rep) {
    const HmmParams init =
        default_init(truth.family, sim.obs, 3, 100 + init_rep);
    EmOptions opts;
    opts.max_iterations = 50;
    opts.tolerance = 0.0;
    const EmResult fit = em_fit(init, sim.obs, opts);
    std::vector<double> trace = fit.loglik_trace;
    trace.push_back(fit.final_loglik);
    for (std::size_t k = 1; k < trace.size(); ++k)
      REQUIRE(trace[k] - trace[k - 1] >= -1e-9);
  }
}

TEST_CASE("em_fit: single state converges in one iteration") {
  HmmParams truth = tiny_disk_model(1);
  truth.emissions[0].sigma = 0.5;
  const auto sim = sampling::simulate_hmm(truth, 400, 31);
  HmmParams init = truth;
  init.emissions[0] = Emission{ManifoldPoint::disk({0.2, -0.3}), 1.2};
  EmOptions opts;
  opts.max_iterations = 10;
  opts.tolerance = 1e-9;
  const EmResult fit = em_fit(init, sim.obs, opts);
  // the first M step already lands on the weighted MLE; the second proves it
  REQUIRE(fit.iterations <= 2);
  std::vector<double> ones(sim.obs.size(), 1.0);
  const auto mle_mean = numerics::weighted_frechet_mean(sim.obs, ones);
  REQUIRE(geometry::riemannian_distance(fit.params.emissions[0].ybar,
                                        mle_mean) < 1e-7);
}

TEST_CASE("em_fit: near-fixed-point stability at the truth") {
  const auto truth = [&] {
    HmmParams p = tiny_disk_model(3);
    p.emissions[0] = Emission{ManifoldPoint::disk({0.0, 0.0}), 0.2};
    p.emissions[1] = Emission{ManifoldPoint::disk({0.5, 0.5}), 0.3};
    p.emissions[2] = Emission{ManifoldPoint::disk({-0.5, 0.5}), 0.3};
    return p;
  }();
  const auto sim = sampling::simulate_hmm(truth, 10000, 555);
  EmOptions opts;
  opts.max_iterations = 1;
  const EmResult fit = em_fit(truth, sim.obs, opts);
  for (int a = 0; a < 3; ++a)
    REQUIRE(geometry::riemannian_distance(fit.params.emissions[a].ybar,
                                          truth.emissions[a].ybar) < 0.05);
}

TEST_CASE("bruteforce guard") {
  HmmParams p = tiny_disk_model(3);
  const auto sim = sampling::simulate_hmm(p, 14, 3);
  REQUIRE_THROWS_AS(bruteforce_loglik(p, sim.obs), EnumerationGuardError);
}

TEST_CASE("complete_loglik") {
  HmmParams p = tiny_disk_model(2);
  Rng rng(71);
  SECTION("T = 1 is the emission term only") {
    CompleteData data;
    data.path = {1};
    data.obs = {test_support::random_point(geometry::Manifold::Disk, 2, rng)};
    REQUIRE(complete_loglik(p, data) ==
            Approx(p.family->log_density(data.obs[0], p.emissions[1].ybar,
                                         p.emissions[1].sigma))
                .epsilon(1e-13));
  }
  SECTION("alternating path under a permutation matrix has zero transition cost") {
    p.P << 0.0, 1.0, 1.0, 0.0;
    CompleteData data;
    for (int t = 0; t < 6; ++t) {
      data.path.push_back(t % 2);
      data.obs.push_back(
          test_support::random_point(geometry::Manifold::Disk, 2, rng));
    }
    double emis = 0.0;
    for (int t = 0; t < 6; ++t)
      emis += p.family->log_density(data.obs[t], p.emissions[t % 2].ybar,
                                    p.emissions[t % 2].sigma);
    REQUIRE(complete_loglik(p, data) == Approx(emis).epsilon(1e-13));
  }
  SECTION("zero-probability transition gives -infinity") {
    p.P << 1.0, 0.0, 0.0, 1.0;
    CompleteData data;
    data.path = {0, 1};
    data.obs = {test_support::random_point(geometry::Manifold::Disk, 2, rng),
                test_support::random_point(geometry::Manifold::Disk, 2, rng)};
    REQUIRE(std::isinf(complete_loglik(p, data)));
    REQUIRE(complete_loglik(p, data) < 0.0);
  }
  SECTION("random instance equals independently recomputed terms") {
    p.P << 0.6, 0.4, 0.3, 0.7;
    CompleteData data;
    Rng prng(99);
    for (int t = 0; t < 9; ++t) {
      data.path.push_back(static_cast<int>(prng.uniform_index(2)));
      data.obs.push_back(
          test_support::random_point(geometry::Manifold::Disk, 2, prng));
    }
    const Eigen::MatrixXd counts = data.transition_counts(2);
    REQUIRE(counts.sum() == Approx(8.0).margin(0.0));
    double expected = 0.0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        expected += counts(a, b) * std::log(p.P(a, b));
    for (int t = 0; t < 9; ++t)
      expected += p.family->log_density(data.obs[t],
                                        p.emissions[data.path[t]].ybar,
                                        p.emissions[data.path[t]].sigma);
    REQUIRE(complete_loglik(p, data) == Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("label alignment finds the best permutation") {
  HmmParams truth = tiny_disk_model(3);
  HmmParams shuffled = truth;
  const int perm[3] = {2, 0, 1};
  for (int a = 0; a < 3; ++a) {
    shuffled.emissions[a] = truth.emissions[perm[a]];
    shuffled.pi1[a] = truth.pi1[perm[a]];
    for (int b = 0; b < 3; ++b)
      shuffled.P(a, b) = truth.P(perm[a], perm[b]);
  }
  const HmmParams aligned = align_labels(shuffled, truth.emissions);
  for (int a = 0; a < 3; ++a)
    REQUIRE(geometry::riemannian_distance(aligned.emissions[a].ybar,
                                          truth.emissions[a].ybar) < 1e-14);
  REQUIRE((aligned.P - truth.P).cwiseAbs().maxCoeff() < 1e-14);
}
