#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "offalign/core.hpp"

namespace offalign {

// Coverage/divergence summary of a policy against the instance's reference.
// c_one is the L1 coverage coefficient C^pi = E_pi[pi/piref]; chi2 is the
// standard chi^2-divergence (c_one - 1)/2; c_smoothed is E_pi[pi/(piref +
// eta*pi)], which caps each ratio at 1/eta.
struct CoverageReport {
  double c_one = 1.0;
  double chi2 = 0.0;
  double kl = 0.0;
  double c_inf = 1.0;
  double c_smoothed = 1.0;
  double eta = 0.0;
};

// Exact tabular sums. Support-aware: terms with pi(a|x) = 0 contribute zero
// (the 0*log 0 convention), and mass placed outside the reference support
// yields +infinity in the unsmoothed coefficients.
inline CoverageReport coverage(const Instance& instance, const Policy& policy, double eta = 0.0) {
  require_same_shape(policy.probs(), instance.pi_ref().probs(), "coverage");
  if (!(eta >= 0.0)) throw DomainError("coverage: eta must be >= 0");
  constexpr double kInf = std::numeric_limits<double>::infinity();

  CoverageReport rep;
  rep.eta = eta;
  double c_one = 0.0, kl = 0.0, smoothed = 0.0, c_inf = 0.0;
  for (std::size_t x = 0; x < instance.n_contexts(); ++x) {
    const double w = instance.rho()[x];
    for (std::size_t a = 0; a < instance.n_actions(); ++a) {
      const double p = policy(x, a);
      if (p == 0.0) continue;
      const double q = instance.pi_ref()(x, a);
      if (q == 0.0) {
        c_one = kl = c_inf = kInf;
        smoothed += w * ((eta > 0.0) ? p / eta : kInf);
        continue;
      }
      const double ratio = p / q;
      c_one += w * p * ratio;
      kl += w * p * std::log(ratio);
      smoothed += w * p * (p / (q + eta * p));
      c_inf = std::max(c_inf, ratio);
    }
  }
  rep.c_one = c_one;
  rep.chi2 = 0.5 * (c_one - 1.0);
  rep.kl = kl;
  rep.c_inf = c_inf;
  rep.c_smoothed = smoothed;
  return rep;
}

}  // namespace offalign
