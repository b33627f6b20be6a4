#pragma once

// Shared test-side oracles. Everything here is deliberately independent of
// the library's solver paths: brute-force enumeration, simplex grids,
// projected gradient ascent, bisection on the raw link definition, and finite
// differences. Oracles are used to compute expected values that the tests
// then assert against the implementation.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "offalign/core.hpp"
#include "offalign/matrix.hpp"
#include "offalign/rng.hpp"

namespace testutil {

using offalign::Instance;
using offalign::Matrix;
using offalign::Policy;
using offalign::RewardModel;

// Bisection for phi(z) = y on a supplied monotone phi, independent of the
// Lambert-W path in the library.
inline double bisect_link_inverse(const std::function<double(double)>& phi, double y,
                                  double z_lo = 1e-300, double z_hi = 1e6) {
  while (phi(z_hi) < y) z_hi *= 2.0;
  for (int i = 0; i < 400; ++i) {
    const double mid = 0.5 * (z_lo + z_hi);
    if (phi(mid) < y) z_lo = mid; else z_hi = mid;
  }
  return 0.5 * (z_lo + z_hi);
}

// E_{x~rho,a~pi}[r(x,a)] accumulated in transposed order, as an independent
// check of expected_return.
inline double return_oracle(const Instance& inst, const Policy& pi, const RewardModel& r) {
  double total = 0.0;
  for (std::size_t a = 0; a < inst.n_actions(); ++a)
    for (std::size_t x = 0; x < inst.n_contexts(); ++x)
      total += inst.rho()[x] * pi(x, a) * r(x, a);
  return total;
}

// Mixed chi^2-regularized objective for a single context row, using the
// f-divergence the link derives from, f(z) = (1/2)(z-1)^2 + gamma*z*log(z):
//   sum p*r - beta*( (1/2) sum (p - c)^2/c + gamma * sum p*log(p/c) ).
inline double mixed_objective_row(const std::vector<double>& p, std::span<const double> piref,
                                  std::span<const double> r, double beta, double gamma = 1.0) {
  double val = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (p[a] == 0.0) {
      val -= beta * 0.5 * piref[a];
      continue;
    }
    const double ratio = p[a] / piref[a];
    val += p[a] * r[a] - beta * (0.5 * piref[a] * (ratio - 1.0) * (ratio - 1.0) +
                                 gamma * p[a] * std::log(ratio));
  }
  return val;
}

// Euclidean projection onto the probability simplex.
inline std::vector<double> project_simplex(std::vector<double> v) {
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double css = 0.0, theta = 0.0;
  int rho_idx = -1;
  for (std::size_t i = 0; i < u.size(); ++i) {
    css += u[i];
    const double t = (css - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) {
      rho_idx = static_cast<int>(i);
      theta = t;
    }
  }
  (void)rho_idx;
  for (auto& x : v) x = std::max(0.0, x - theta);
  return v;
}

// Projected gradient ascent on the mixed chi^2 objective over one context's
// simplex, with monotone backtracking (the KL barrier makes the problem stiff
// near the boundary, so a fixed step cannot converge). The step grows back
// after accepted moves. This is an oracle, not a production path.
inline std::vector<double> pga_mixed_oracle(std::span<const double> piref,
                                            std::span<const double> r, double beta,
                                            std::size_t iters = 3000000, double lr0 = 0.5) {
  const std::size_t A = piref.size();
  std::vector<double> p(piref.begin(), piref.end());
  const auto objective = [&](const std::vector<double>& q) {
    return mixed_objective_row(q, piref, r, beta, 1.0);
  };
  double obj = objective(p);
  double lr = lr0;
  std::vector<double> g(A), cand(A);
  for (std::size_t it = 0; it < iters; ++it) {
    for (std::size_t a = 0; a < A; ++a) {
      const double ratio = std::max(p[a], 1e-300) / piref[a];
      // d/dp of beta*(c/2 (ratio-1)^2 + p log ratio) = beta*(ratio - 1 + log ratio + 1)
      g[a] = r[a] - beta * (ratio + std::log(ratio));
    }
    bool accepted = false;
    double step = lr;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t a = 0; a < A; ++a) cand[a] = p[a] + step * g[a];
      cand = project_simplex(cand);
      const double cobj = objective(cand);
      if (cobj >= obj) {
        p = cand;
        obj = cobj;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    lr = accepted ? std::min(lr0, step * 2.0) : lr * 0.5;
    if (lr < 1e-18) break;
  }
  return p;
}

// Exhaustive mesh search over the 3-action simplex for the smoothed chi^2
// objective sum p*r - beta * sum p^2/(c + eta*p).
inline double grid_best_smoothed_objective(std::span<const double> piref,
                                           std::span<const double> r, double beta, double eta,
                                           std::size_t steps = 1000) {
  double best = -1e300;
  for (std::size_t i = 0; i <= steps; ++i)
    for (std::size_t j = 0; i + j <= steps; ++j) {
      const double p0 = static_cast<double>(i) / static_cast<double>(steps);
      const double p1 = static_cast<double>(j) / static_cast<double>(steps);
      const double p2 = 1.0 - p0 - p1;
      double val = p0 * r[0] + p1 * r[1] + p2 * r[2];
      const double ps[3] = {p0, p1, p2};
      for (int a = 0; a < 3; ++a) {
        const double denom = piref[a] + eta * ps[a];
        if (ps[a] > 0.0) {
          if (denom == 0.0) { val = -1e300; break; }
          val -= beta * ps[a] * ps[a] / denom;
        }
      }
      best = std::max(best, val);
    }
  return best;
}

inline double smoothed_objective(const Instance& inst, const Policy& pi, const RewardModel& r,
                                 double beta, double eta, std::size_t x) {
  double val = 0.0;
  for (std::size_t a = 0; a < inst.n_actions(); ++a) {
    val += pi(x, a) * r(x, a);
    if (pi(x, a) > 0.0) val -= beta * pi(x, a) * pi(x, a) / (inst.pi_ref()(x, a) + eta * pi(x, a));
  }
  return val;
}

// Strictly positive random policy with ratios bounded away from extremes.
inline Policy random_positive_policy(offalign::Rng& rng, std::size_t X, std::size_t A) {
  Matrix m(X, A);
  for (std::size_t x = 0; x < X; ++x) {
    double sum = 0.0;
    for (std::size_t a = 0; a < A; ++a) {
      m(x, a) = 0.05 + rng.uniform();
      sum += m(x, a);
    }
    for (std::size_t a = 0; a < A; ++a) m(x, a) /= sum;
  }
  return Policy(std::move(m));
}

// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(xs[i]);
    my += std::log(ys[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(xs[i]) - mx;
    num += dx * (std::log(ys[i]) - my);
    den += dx * dx;
  }
  return num / den;
}

// E_{x~rho, a~piref, b~piref} (dhat(x,a,b) - dstar(x,a,b))^2 for reward
// differences d(x,a,b) = r(x,a) - r(x,b).
inline double reward_diff_mse(const Instance& inst, const RewardModel& rhat) {
  double total = 0.0;
  for (std::size_t x = 0; x < inst.n_contexts(); ++x)
    for (std::size_t a = 0; a < inst.n_actions(); ++a)
      for (std::size_t b = 0; b < inst.n_actions(); ++b) {
        const double w = inst.rho()[x] * inst.pi_ref()(x, a) * inst.pi_ref()(x, b);
        if (w == 0.0) continue;
        const double dh = rhat(x, a) - rhat(x, b);
        const double ds = inst.r_star()(x, a) - inst.r_star()(x, b);
        total += w * (dh - ds) * (dh - ds);
      }
  return total;
}

}  // namespace testutil
