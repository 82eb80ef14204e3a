#pragma once

// Inversion of psi' (strictly increasing on the admissible eta interval):
// a safeguarded Newton solver with bisection fallback, and the table-search
// variant. Targets outside the attainable range are clamped to the interval
// boundary and flagged rather than rejected, so EM iterations stay total.

#include <algorithm>
#include <cmath>
#include <vector>

#include "mhmm/errors.hpp"
#include "mhmm/geometry/family.hpp"

namespace mhmm::numerics {

struct RootSolveConfig {
  double tolerance = 1e-10;  // on the residual |psi'(eta) - target|
  int max_iterations = 100;
  // bracket; NaN means "use the family's admissible eta interval"
  double bracket_lo = std::numeric_limits<double>::quiet_NaN();
  double bracket_hi = std::numeric_limits<double>::quiet_NaN();
};

struct RootSolveResult {
  double eta = 0.0;
  bool clamped = false;  // target was outside psi'([lo, hi])
  int iterations = 0;
};

namespace detail {

inline void resolve_bracket(const geometry::LocationScaleFamily& family,
                            const RootSolveConfig& cfg, double& lo,
                            double& hi) {
  const geometry::Interval iv = family.eta_interval();
  lo = std::isnan(cfg.bracket_lo) ? iv.lo : cfg.bracket_lo;
  hi = std::isnan(cfg.bracket_hi) ? iv.hi : cfg.bracket_hi;
  if (!(lo < hi) || !iv.contains(lo) || !iv.contains(hi))
    throw DomainError("root solve bracket outside the admissible interval");
  if (!(cfg.tolerance > 0.0)) throw DomainError("tolerance must be positive");
}

// Bisection midpoint: geometric in |eta| when the bracket spans decades of
// negative eta, arithmetic otherwise.
inline double midpoint(double lo, double hi) {
  if (hi < 0.0 && lo / hi > 1e3) return -std::sqrt(lo * hi);
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Solve psi'(eta) = target on the bracket. Monotonicity of psi' makes the
/// bracketed Newton iteration globally convergent.
inline RootSolveResult inverse_psi_prime(
    const geometry::LocationScaleFamily& family, double target,
    const RootSolveConfig& cfg = {}) {
  double lo, hi;
  detail::resolve_bracket(family, cfg, lo, hi);

  const double flo = family.psi_prime(lo);
  const double fhi = family.psi_prime(hi);
  if (target <= flo) return {lo, target < flo, 0};
  if (target >= fhi) return {hi, target > fhi, 0};

  double eta = detail::midpoint(lo, hi);
  double resid = family.psi_prime(eta) - target;
  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    if (std::fabs(resid) <= cfg.tolerance) break;
    if (resid > 0.0)
      hi = eta;
    else
      lo = eta;
    double next = eta - resid / family.psi_second(eta);
    if (!(next > lo && next < hi)) next = detail::midpoint(lo, hi);
    if (next == eta) break;  // bracket exhausted at machine precision
    eta = next;
    resid = family.psi_prime(eta) - target;
  }
  return {eta, false, it};
}

/// Precomputed psi' table on an eta grid; lookup is a binary search plus
/// linear interpolation inside the cell, so the answer is within one cell
/// width of the Newton solution.
class PsiPrimeTable {
 public:
  PsiPrimeTable(const geometry::LocationScaleFamily& family, int table_size,
                double eta_lo = std::numeric_limits<double>::quiet_NaN(),
                double eta_hi = std::numeric_limits<double>::quiet_NaN()) {
    if (table_size < 2) throw DomainError("table_size >= 2 required");
    const geometry::Interval iv = family.eta_interval();
    const double lo = std::isnan(eta_lo) ? iv.lo : eta_lo;
    const double hi = std::isnan(eta_hi) ? iv.hi : eta_hi;
    if (!(lo < hi) || !iv.contains(lo) || !iv.contains(hi))
      throw DomainError("table interval outside the admissible interval");
    eta_.resize(table_size);
    val_.resize(table_size);
    for (int i = 0; i < table_size; ++i) {
      eta_[i] = i == table_size - 1 ? hi
                                    : lo + (hi - lo) * i / (table_size - 1.0);
      val_[i] = family.psi_prime(eta_[i]);
    }
  }

  double lookup(double target) const {
    if (target <= val_.front()) return eta_.front();
    if (target >= val_.back()) return eta_.back();
    const auto it = std::upper_bound(val_.begin(), val_.end(), target);
    const std::size_t j = static_cast<std::size_t>(it - val_.begin());
    const double t = (target - val_[j - 1]) / (val_[j] - val_[j - 1]);
    return eta_[j - 1] + t * (eta_[j] - eta_[j - 1]);
  }

  double cell_width() const { return eta_[1] - eta_[0]; }

 private:
  std::vector<double> eta_;
  std::vector<double> val_;
};

/// One-shot table lookup matching the PsiPrimeTable construction.
inline double table_inverse_psi_prime(
    const geometry::LocationScaleFamily& family, double target,
    int table_size) {
  return PsiPrimeTable(family, table_size).lookup(target);
}

}  // namespace mhmm::numerics
