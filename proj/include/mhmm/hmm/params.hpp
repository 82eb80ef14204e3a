#pragma once

#include <Eigen/Dense>
#include <memory>
#include <utility>
#include <vector>

#include "mhmm/errors.hpp"
#include "mhmm/geometry/family.hpp"
#include "mhmm/geometry/point.hpp"

namespace mhmm::hmm {

struct Emission {
  geometry::ManifoldPoint ybar;
  double sigma;
};

/// theta = (P, pi1, {ybar_alpha, sigma_alpha}) plus the emission family.
struct HmmParams {
  std::shared_ptr<const geometry::LocationScaleFamily> family;
  Eigen::MatrixXd P;       // |S| x |S| transition matrix, rows sum to 1
  Eigen::VectorXd pi1;     // initial law
  std::vector<Emission> emissions;

  int n_states() const { return static_cast<int>(emissions.size()); }

  void validate() const {
    if (!family) throw DomainError("hmm params: missing family");
    const int s = n_states();
    if (s < 1) throw DomainError("hmm params: at least one state required");
    if (P.rows() != s || P.cols() != s)
      throw DomainError("hmm params: transition matrix shape mismatch");
    if (pi1.size() != s)
      throw DomainError("hmm params: initial law length mismatch");
    for (int a = 0; a < s; ++a) {
      double row = 0.0;
      for (int b = 0; b < s; ++b) {
        if (P(a, b) < 0.0)
          throw DomainError("hmm params: negative transition probability");
        row += P(a, b);
      }
      if (std::fabs(row - 1.0) > 1e-12)
        throw DomainError("hmm params: transition row does not sum to 1");
      if (pi1[a] < 0.0)
        throw DomainError("hmm params: negative initial probability");
    }
    if (std::fabs(pi1.sum() - 1.0) > 1e-12)
      throw DomainError("hmm params: initial law does not sum to 1");
    for (const Emission& e : emissions) {
      if (e.ybar.manifold() != family->manifold())
        throw ManifoldMismatchError(
            "hmm params: emission location off the family manifold");
      if (!family->sigma_interval().contains(e.sigma))
        throw DomainError("hmm params: sigma outside the admissible interval");
    }
  }
};

/// Complete data x_t = (y_t, q_t); states are 0-based.
struct CompleteData {
  std::vector<int> path;
  std::vector<geometry::ManifoldPoint> obs;

  /// N_{alpha beta}(q): number of t with (q_t, q_{t+1}) = (alpha, beta).
  Eigen::MatrixXd transition_counts(int n_states) const {
    Eigen::MatrixXd n = Eigen::MatrixXd::Zero(n_states, n_states);
    for (std::size_t t = 0; t + 1 < path.size(); ++t)
      n(path[t], path[t + 1]) += 1.0;
    return n;
  }
};

}  // namespace mhmm::hmm
