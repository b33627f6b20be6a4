#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "offalign/core.hpp"

namespace offalign {

// Skew-symmetric preference function ell(x, a, b) in [-1, 1]:
// ell(x,a,a) = 0 and ell(x,a,b) = -ell(x,b,a) exactly (bitwise), validated at
// construction. Stored as a dense X*A*A tensor.
class PreferenceFunction {
 public:
  PreferenceFunction() = default;
  PreferenceFunction(std::size_t n_contexts, std::size_t n_actions, std::vector<double> values)
      : n_contexts_(n_contexts), n_actions_(n_actions), values_(std::move(values)) {
    if (values_.size() != n_contexts_ * n_actions_ * n_actions_)
      throw DimensionError("PreferenceFunction: tensor size mismatch");
    validate();
  }

  // Build from the strictly-upper-triangular entries per context; the lower
  // triangle is mirrored with negation so skew-symmetry is exact by
  // construction. upper(x, a, b) is consulted for a < b only.
  template <typename F>
  static PreferenceFunction from_upper(std::size_t n_contexts, std::size_t n_actions, F&& upper) {
    std::vector<double> v(n_contexts * n_actions * n_actions, 0.0);
    PreferenceFunction out;
    out.n_contexts_ = n_contexts;
    out.n_actions_ = n_actions;
    out.values_ = std::move(v);
    for (std::size_t x = 0; x < n_contexts; ++x)
      for (std::size_t a = 0; a < n_actions; ++a)
        for (std::size_t b = a + 1; b < n_actions; ++b) {
          const double val = upper(x, a, b);
          out.values_[out.index(x, a, b)] = val;
          out.values_[out.index(x, b, a)] = -val;
        }
    out.validate();
    return out;
  }

  // ell(x,a,b) = 2*sigma(r(x,a) - r(x,b)) - 1 = tanh((r(x,a)-r(x,b))/2).
  static PreferenceFunction from_bradley_terry(const RewardModel& reward) {
    return from_upper(reward.n_contexts(), reward.n_actions(),
                      [&](std::size_t x, std::size_t a, std::size_t b) {
                        return std::tanh(0.5 * (reward(x, a) - reward(x, b)));
                      });
  }

  static PreferenceFunction zero(std::size_t n_contexts, std::size_t n_actions) {
    return PreferenceFunction(n_contexts, n_actions,
                              std::vector<double>(n_contexts * n_actions * n_actions, 0.0));
  }

  std::size_t n_contexts() const { return n_contexts_; }
  std::size_t n_actions() const { return n_actions_; }
  double operator()(std::size_t x, std::size_t a, std::size_t b) const {
    return values_[index(x, a, b)];
  }
  const std::vector<double>& values() const { return values_; }

  friend bool operator==(const PreferenceFunction&, const PreferenceFunction&) = default;

 private:
  std::size_t index(std::size_t x, std::size_t a, std::size_t b) const {
    return (x * n_actions_ + a) * n_actions_ + b;
  }

  void validate() const {
    for (std::size_t x = 0; x < n_contexts_; ++x)
      for (std::size_t a = 0; a < n_actions_; ++a) {
        if (values_[index(x, a, a)] != 0.0)
          throw DomainError("PreferenceFunction: nonzero diagonal at context " +
                            std::to_string(x));
        for (std::size_t b = 0; b < n_actions_; ++b) {
          const double v = values_[index(x, a, b)];
          if (!(v >= -1.0 && v <= 1.0))
            throw DomainError("PreferenceFunction: value outside [-1, 1]");
          if (v != -values_[index(x, b, a)])
            throw DomainError("PreferenceFunction: skew-symmetry violated at (" +
                              std::to_string(x) + "," + std::to_string(a) + "," +
                              std::to_string(b) + ")");
        }
      }
  }

  std::size_t n_contexts_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<double> values_;
};

// ell(pi, pi') = E_{x~rho, a~pi, b~pi'} [ell(x,a,b)], exact trilinear sum.
inline double pref_value(const std::vector<double>& rho, const PreferenceFunction& l,
                         const Policy& pi, const Policy& pi2) {
  if (rho.size() != l.n_contexts() || pi.n_contexts() != l.n_contexts() ||
      pi2.n_contexts() != l.n_contexts() || pi.n_actions() != l.n_actions() ||
      pi2.n_actions() != l.n_actions())
    throw DimensionError("pref_value: shape mismatch");
  double total = 0.0;
  for (std::size_t x = 0; x < l.n_contexts(); ++x) {
    double inner = 0.0;
    for (std::size_t a = 0; a < l.n_actions(); ++a) {
      if (pi(x, a) == 0.0) continue;
      double row = 0.0;
      for (std::size_t b = 0; b < l.n_actions(); ++b) row += pi2(x, b) * l(x, a, b);
      inner += pi(x, a) * row;
    }
    total += rho[x] * inner;
  }
  return total;
}

struct BestResponse {
  Policy policy;
  double value = 0.0;
};

// max over all policies q of ell(q, pi): per context the greedy action
// maximizing E_{b~pi(x)} ell(x,a,b); lowest index wins ties.
inline BestResponse best_response(const std::vector<double>& rho, const PreferenceFunction& l,
                                  const Policy& pi) {
  if (rho.size() != l.n_contexts() || pi.n_contexts() != l.n_contexts() ||
      pi.n_actions() != l.n_actions())
    throw DimensionError("best_response: shape mismatch");
  Matrix probs(l.n_contexts(), l.n_actions(), 0.0);
  double value = 0.0;
  for (std::size_t x = 0; x < l.n_contexts(); ++x) {
    double best = -2.0;
    std::size_t best_a = 0;
    for (std::size_t a = 0; a < l.n_actions(); ++a) {
      double u = 0.0;
      for (std::size_t b = 0; b < l.n_actions(); ++b) u += pi(x, b) * l(x, a, b);
      if (u > best) {
        best = u;
        best_a = a;
      }
    }
    probs(x, best_a) = 1.0;
    value += rho[x] * best;
  }
  return {Policy(std::move(probs)), value};
}

// DG(pi) = max_q ell(q, pi) - min_q ell(pi, q) = 2 * max_q ell(q, pi) by
// skew-symmetry; non-negative since the max dominates the diagonal value 0.
inline double duality_gap(const std::vector<double>& rho, const PreferenceFunction& l,
                          const Policy& pi) {
  return 2.0 * best_response(rho, l, pi).value;
}

struct MinimaxResult {
  Policy policy;
  double gap = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

// Approximate minimax (von Neumann) winner of the skew-symmetric game by
// multiplicative-weights self-play with annealed step size
// eta_t = sqrt(8 ln K / t) and averaged iterates. The game separates across
// contexts, so each context's matrix game is solved independently; the
// returned gap is certified through best_response on the averaged policy.
inline MinimaxResult minimax_winner(const std::vector<double>& rho, const PreferenceFunction& l,
                                    double tol, std::size_t max_iters) {
  if (!(tol > 0.0)) throw DomainError("minimax_winner: tol must be positive");
  const std::size_t X = l.n_contexts(), A = l.n_actions();
  if (rho.size() != X) throw DimensionError("minimax_winner: rho size");

  const double log_k = std::log(static_cast<double>(std::max<std::size_t>(A, 2)));
  Matrix avg(X, A, 0.0);
  MinimaxResult result;
  result.gap = std::numeric_limits<double>::infinity();

  std::vector<std::vector<double>> cum(X, std::vector<double>(A, 0.0));
  std::vector<std::vector<double>> play(X, std::vector<double>(A, 1.0 / static_cast<double>(A)));

  Matrix best_avg = avg;
  double best_gap = std::numeric_limits<double>::infinity();
  std::size_t t = 0;
  const std::size_t check_every = 25;
  while (t < max_iters) {
    ++t;
    for (std::size_t x = 0; x < X; ++x) {
      // payoff of each row against the current mixed strategy
      std::vector<double> u(A, 0.0);
      for (std::size_t a = 0; a < A; ++a)
        for (std::size_t b = 0; b < A; ++b) u[a] += play[x][b] * l(x, a, b);
      for (std::size_t a = 0; a < A; ++a) {
        cum[x][a] += u[a];
        avg(x, a) += play[x][a];
      }
      const double eta = std::sqrt(8.0 * log_k / static_cast<double>(t));
      double m = cum[x][0];
      for (double c : cum[x]) m = std::max(m, c);
      double z = 0.0;
      for (std::size_t a = 0; a < A; ++a) {
        play[x][a] = std::exp(eta * (cum[x][a] - m));
        z += play[x][a];
      }
      for (std::size_t a = 0; a < A; ++a) play[x][a] /= z;
    }
    if (t % check_every == 0 || t == max_iters) {
      Matrix current = avg;
      for (auto& v : current.data()) v /= static_cast<double>(t);
      Policy pol(current);
      const double gap = duality_gap(rho, l, pol);
      if (gap < best_gap) {
        best_gap = gap;
        best_avg = current;
      }
      if (gap <= tol) {
        result.policy = std::move(pol);
        result.gap = gap;
        result.converged = true;
        result.iterations = t;
        return result;
      }
    }
  }
  result.policy = Policy(best_avg);
  result.gap = best_gap;
  result.converged = false;
  result.iterations = t;
  return result;
}

// Best response restricted to per-context chi^2 coverage <= bound, evaluated
// by grid search over each context's simplex (mesh resolution `mesh`). This is
// an approximation of the coverage-limited suboptimality term and is only
// suitable for small action counts.
inline BestResponse best_response_coverage_limited(const std::vector<double>& rho,
                                                   const PreferenceFunction& l, const Policy& pi,
                                                   const Policy& pi_ref, double chi2_bound,
                                                   double mesh = 0.02) {
  const std::size_t X = l.n_contexts(), A = l.n_actions();
  const auto chi2_row = [&](std::span<const double> p, std::size_t x) {
    double c_one = 0.0;
    for (std::size_t a = 0; a < A; ++a) {
      if (p[a] == 0.0) continue;
      if (pi_ref(x, a) == 0.0) return std::numeric_limits<double>::infinity();
      c_one += p[a] * p[a] / pi_ref(x, a);
    }
    return 0.5 * (c_one - 1.0);
  };

  Matrix probs(X, A, 0.0);
  double value = 0.0;
  const auto steps = static_cast<std::size_t>(std::llround(1.0 / mesh));
  for (std::size_t x = 0; x < X; ++x) {
    std::vector<double> u(A, 0.0);
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t b = 0; b < A; ++b) u[a] += pi(x, b) * l(x, a, b);

    std::vector<double> point(A, 0.0), best_point(A, 0.0);
    double best = -std::numeric_limits<double>::infinity();
    // enumerate compositions of `steps` into A parts
    std::vector<std::size_t> comp(A, 0);
    const auto recurse = [&](auto&& self, std::size_t idx, std::size_t remaining) -> void {
      if (idx + 1 == A) {
        comp[idx] = remaining;
        double val = 0.0;
        for (std::size_t a = 0; a < A; ++a) {
          point[a] = static_cast<double>(comp[a]) / static_cast<double>(steps);
          val += point[a] * u[a];
        }
        if (val > best && chi2_row(point, x) <= chi2_bound) {
          best = val;
          best_point = point;
        }
        return;
      }
      for (std::size_t k = 0; k <= remaining; ++k) {
        comp[idx] = k;
        self(self, idx + 1, remaining - k);
      }
    };
    recurse(recurse, 0, steps);
    if (!std::isfinite(best))
      throw SolverError("best_response_coverage_limited: no feasible grid point");
    for (std::size_t a = 0; a < A; ++a) probs(x, a) = best_point[a];
    value += rho[x] * best;
  }
  return {Policy(std::move(probs)), value};
}

}  // namespace offalign
