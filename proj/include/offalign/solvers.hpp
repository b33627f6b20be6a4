#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "offalign/core.hpp"
#include "offalign/links.hpp"

namespace offalign {

// Output of a per-context normalization solve: the policy, the dual/normalizer
// Z(x) per context, and the worst row-sum residual before final renormalization.
struct NormalizationResult {
  Policy policy;
  std::vector<double> z;
  double residual = 0.0;
};

namespace detail {

struct RowSolve {
  std::vector<double> probs;
  double z = 0.0;
  double residual = 0.0;
};

// Exact softmax row for the KL link: pi = piref * exp((r - Z)/beta) with
// Z = m + beta*log sum piref*exp((r-m)/beta).
inline RowSolve solve_row_kl(std::span<const double> piref, std::span<const double> reward,
                             double beta) {
  RowSolve out;
  out.probs.assign(piref.size(), 0.0);
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < piref.size(); ++a)
    if (piref[a] > 0.0) m = std::max(m, reward[a]);
  double sum = 0.0;
  for (std::size_t a = 0; a < piref.size(); ++a) {
    if (piref[a] == 0.0) continue;
    out.probs[a] = piref[a] * std::exp((reward[a] - m) / beta);
    sum += out.probs[a];
  }
  for (auto& p : out.probs) p /= sum;
  out.z = m + beta * std::log(sum);
  out.residual = 0.0;
  return out;
}

// Monotone bisection on the normalizer Z: the row sum
// S(Z) = sum_a piref(a) * phi^{-1}((r(a) - Z)/beta) is strictly decreasing, so
// any bracket with S(lo) >= 1 >= S(hi) pins Z. The initial bracket follows the
// link's growth bounds and is widened geometrically if floating-point slack
// spoils it.
inline RowSolve solve_row_regularized(std::span<const double> piref,
                                      std::span<const double> reward, double beta,
                                      const LinkSpec& spec) {
  const std::size_t n = piref.size();
  RowSolve out;
  out.probs.assign(n, 0.0);

  std::size_t support = 0, last = 0;
  double min_ref = 1.0, min_r = std::numeric_limits<double>::infinity(), max_r = -min_r;
  for (std::size_t a = 0; a < n; ++a) {
    if (piref[a] == 0.0) continue;
    ++support;
    last = a;
    min_ref = std::min(min_ref, piref[a]);
    min_r = std::min(min_r, reward[a]);
    max_r = std::max(max_r, reward[a]);
  }
  if (support == 0) throw SolverError("solve_row_regularized: empty reference support");
  if (support == 1) {
    out.probs[last] = 1.0;
    out.z = reward[last] - beta * link_value(spec, 1.0);
    return out;
  }
  if (spec.is_kl()) return solve_row_kl(piref, reward, beta);

  const auto row_sum = [&](double z) {
    double s = 0.0;
    for (std::size_t a = 0; a < n; ++a)
      if (piref[a] > 0.0) s += piref[a] * link_inverse(spec, (reward[a] - z) / beta);
    return s;
  };

  double lo = min_r - beta * link_value(spec, 1.0 / min_ref) - 1.0;
  double hi = max_r + beta * std::abs(link_value(spec, min_ref)) + 1.0;
  bool bracketed = false;
  for (int attempt = 0; attempt < 60; ++attempt) {
    if (row_sum(lo) >= 1.0 && row_sum(hi) <= 1.0) {
      bracketed = true;
      break;
    }
    const double width = hi - lo;
    lo -= width;
    hi += width;
  }
  if (!bracketed)
    throw SolverError("solve_row_regularized: bracket failure after widening (beta=" +
                      std::to_string(beta) + ", reward range [" + std::to_string(min_r) + ", " +
                      std::to_string(max_r) + "])");

  double s_mid = 0.0, mid = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    mid = 0.5 * (lo + hi);
    s_mid = row_sum(mid);
    if (std::abs(s_mid - 1.0) <= 1e-12) break;
    if (s_mid > 1.0) lo = mid; else hi = mid;
  }
  out.z = mid;
  out.residual = std::abs(s_mid - 1.0);
  if (out.residual > 1e-10)
    throw SolverError("solve_row_regularized: normalization residual " +
                      std::to_string(out.residual) + " exceeds 1e-10");
  double sum = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    if (piref[a] > 0.0) out.probs[a] = piref[a] * link_inverse(spec, (reward[a] - mid) / beta);
    sum += out.probs[a];
  }
  for (auto& p : out.probs) p /= sum;
  return out;
}

}  // namespace detail

// The optimal policy of the f-regularized objective
//   E_pi[r] - beta * D_f(pi || piref)
// for the link's divergence: pi(a|x) = piref(a|x) * phi^{-1}((r(x,a) - Z(x))/beta).
// Rewards outside [0, R_max] are accepted; implicit rewards from learned
// policies routinely exceed that range.
inline NormalizationResult solve_regularized(const Instance& instance, const RewardModel& reward,
                                             double beta, const LinkSpec& spec) {
  if (!(beta > 0.0)) throw DomainError("solve_regularized: beta must be positive");
  require_same_shape(reward.values(), instance.pi_ref().probs(), "solve_regularized");

  NormalizationResult result;
  Matrix probs(instance.n_contexts(), instance.n_actions());
  result.z.resize(instance.n_contexts());
  result.residual = 0.0;
  for (std::size_t x = 0; x < instance.n_contexts(); ++x) {
    auto row = detail::solve_row_regularized(instance.pi_ref().row(x), reward.row(x), beta, spec);
    for (std::size_t a = 0; a < instance.n_actions(); ++a) probs(x, a) = row.probs[a];
    result.z[x] = row.z;
    result.residual = std::max(result.residual, row.residual);
  }
  result.policy = Policy(std::move(probs));
  return result;
}

namespace detail {

// Marginal regularization derivative for the smoothed chi^2 penalty
// p^2/(c + eta*p):  g(p) = p*(2c + eta*p)/(c + eta*p)^2, strictly increasing
// with range [0, 1/eta) for eta > 0 (and 2p/c when eta = 0).
inline double smoothed_marginal(double p, double c, double eta) {
  const double denom = c + eta * p;
  return p * (2.0 * c + eta * p) / (denom * denom);
}

// Inverse of smoothed_marginal in p for 0 <= y < 1/eta. Writing u = eta*p/c
// gives g = (1/eta)(1 - 1/(1+u)^2), which inverts in closed form:
//   p = (c/eta) * (1/sqrt(1 - eta*y) - 1),
// evaluated in a cancellation-free arrangement for small eta*y.
inline double smoothed_marginal_inverse(double y, double c, double eta) {
  if (y <= 0.0) return 0.0;
  if (eta == 0.0) return 0.5 * c * y;
  const double x = eta * y;  // in (0, 1)
  const double root = std::sqrt(1.0 - x);
  return (c / eta) * x / (root * (1.0 + root));
}

}  // namespace detail

// Exact per-context maximizer of
//   sum_a p(a) r(x,a) - beta * sum_a p(a)^2 / (piref(a|x) + eta p(a))
// over the simplex, via KKT: p(a) = g^{-1}((r(a) - lambda)/beta) clipped at
// zero, with the dual lambda found by outer bisection on normalization.
inline Policy solve_smoothed_chi2(const Instance& instance, const RewardModel& reward, double beta,
                                  double eta) {
  if (!(beta > 0.0)) throw DomainError("solve_smoothed_chi2: beta must be positive");
  if (!(eta >= 0.0)) throw DomainError("solve_smoothed_chi2: eta must be >= 0");
  require_same_shape(reward.values(), instance.pi_ref().probs(), "solve_smoothed_chi2");

  const std::size_t A = instance.n_actions();
  Matrix probs(instance.n_contexts(), A);
  for (std::size_t x = 0; x < instance.n_contexts(); ++x) {
    const auto piref = instance.pi_ref().row(x);
    const auto r = reward.row(x);

    const auto mass_at = [&](double lambda, std::vector<double>* out) {
      double total = 0.0;
      for (std::size_t a = 0; a < A; ++a) {
        const double y = (r[a] - lambda) / beta;
        double p = 0.0;
        if (y > 0.0) {
          if (piref[a] == 0.0) {
            // penalty is linear p/eta here: mass only flows once y reaches 1/eta
            if (eta == 0.0) p = 0.0;
            else if (y >= 1.0 / eta) return std::numeric_limits<double>::infinity();
            else p = 0.0;
          } else if (eta > 0.0 && y >= 1.0 / eta) {
            return std::numeric_limits<double>::infinity();
          } else {
            p = detail::smoothed_marginal_inverse(y, piref[a], eta);
          }
        }
        if (out) (*out)[a] = p;
        total += p;
      }
      return total;
    };

    double hi = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < A; ++a) {
      hi = std::max(hi, r[a]);
      if (piref[a] > 0.0)
        lo = std::min(lo, r[a] - beta * detail::smoothed_marginal(1.0, piref[a], eta) - 1.0);
    }
    if (!std::isfinite(lo)) throw SolverError("solve_smoothed_chi2: empty reference support");
    for (int attempt = 0; attempt < 60 && mass_at(lo, nullptr) < 1.0; ++attempt)
      lo -= std::max(1.0, hi - lo);

    std::vector<double> p(A, 0.0);
    double lambda = 0.5 * (lo + hi);
    bool collapsed = false;
    for (int iter = 0; iter < 200; ++iter) {
      lambda = 0.5 * (lo + hi);
      const double total = mass_at(lambda, nullptr);
      if (std::isfinite(total) && std::abs(total - 1.0) <= 1e-12) break;
      if (total > 1.0) lo = lambda; else hi = lambda;
      // extreme beta/eta make the mass curve so steep that adjacent doubles
      // in lambda straddle the target; once the interval collapses, take the
      // finite-mass side and absorb the residual in the final normalization
      // (a proportional rescale, which barely perturbs stationarity because
      // the marginal curve is flat wherever this regime arises)
      if (hi - lo <= 4e-16 * std::max({1.0, std::abs(lo), std::abs(hi)})) {
        lambda = hi;
        collapsed = true;
        break;
      }
    }
    double total = mass_at(lambda, &p);
    if (!std::isfinite(total)) {
      lambda = hi;
      total = mass_at(lambda, &p);
    }
    const double gate = collapsed ? 0.5 : 1e-8;
    if (!std::isfinite(total) || std::abs(total - 1.0) > gate)
      throw SolverError("solve_smoothed_chi2: dual bisection failed at context " +
                        std::to_string(x));
    for (std::size_t a = 0; a < A; ++a) probs(x, a) = p[a] / total;
  }
  return Policy(std::move(probs));
}

// One Bregman mirror-descent step for the mixed chi^2 regularizer:
//   pi(a|x) = piref(a|x) * phi^{-1}([r(x,a) + (beta/eta) phi(pi_t/piref) - Z]
//                                    / (beta (1 + 1/eta)))
// with phi(z) = z + log z. Satisfies the stationarity identity
// f(x,a,b) = r(x,a) - r(x,b) for the policy-dependent predictor f.
inline NormalizationResult mirror_step(const Instance& instance, const Policy& pi_t,
                                       const RewardModel& reward, double beta, double eta) {
  if (!(beta > 0.0) || !(eta > 0.0)) throw DomainError("mirror_step: beta, eta must be positive");
  require_same_shape(pi_t.probs(), instance.pi_ref().probs(), "mirror_step: pi_t");
  require_same_shape(reward.values(), instance.pi_ref().probs(), "mirror_step: reward");

  const LinkSpec chi = LinkSpec::mixed_chi2(1.0);
  const double eff_beta = beta * (1.0 + 1.0 / eta);
  NormalizationResult result;
  Matrix probs(instance.n_contexts(), instance.n_actions());
  result.z.resize(instance.n_contexts());
  for (std::size_t x = 0; x < instance.n_contexts(); ++x) {
    std::vector<double> eff_reward(instance.n_actions(), 0.0);
    for (std::size_t a = 0; a < instance.n_actions(); ++a) {
      const double ref = instance.pi_ref()(x, a);
      if (ref == 0.0) continue;
      if (!(pi_t(x, a) > 0.0))
        throw DomainError("mirror_step: pi_t must be strictly positive on the support");
      eff_reward[a] = reward(x, a) + (beta / eta) * link_value(chi, pi_t(x, a) / ref);
    }
    auto row =
        detail::solve_row_regularized(instance.pi_ref().row(x), eff_reward, eff_beta, chi);
    for (std::size_t a = 0; a < instance.n_actions(); ++a) probs(x, a) = row.probs[a];
    result.z[x] = row.z;
    result.residual = std::max(result.residual, row.residual);
  }
  result.policy = Policy(std::move(probs));
  return result;
}

}  // namespace offalign
