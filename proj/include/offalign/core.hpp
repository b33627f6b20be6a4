#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "offalign/errors.hpp"
#include "offalign/matrix.hpp"

namespace offalign {

inline constexpr double kRowSumTol = 1e-12;

// Per-context probability distribution over actions. Immutable after
// construction; rows must sum to 1 within kRowSumTol. Zero entries are
// allowed: the lower-bound constructions place reference mass zero on some
// actions, and every ratio computation in the library is support-aware.
class Policy {
 public:
  Policy() = default;
  explicit Policy(Matrix probs) : probs_(std::move(probs)) { validate(); }

  static Policy uniform(std::size_t n_contexts, std::size_t n_actions) {
    return Policy(Matrix(n_contexts, n_actions, 1.0 / static_cast<double>(n_actions)));
  }

  static Policy point_mass(std::size_t n_contexts, std::size_t n_actions, std::size_t action) {
    Matrix m(n_contexts, n_actions, 0.0);
    for (std::size_t x = 0; x < n_contexts; ++x) m(x, action) = 1.0;
    return Policy(std::move(m));
  }

  const Matrix& probs() const { return probs_; }
  std::size_t n_contexts() const { return probs_.rows(); }
  std::size_t n_actions() const { return probs_.cols(); }
  double operator()(std::size_t x, std::size_t a) const { return probs_(x, a); }
  std::span<const double> row(std::size_t x) const { return probs_.row(x); }

  bool strictly_positive() const {
    for (double p : probs_.data())
      if (!(p > 0.0)) return false;
    return true;
  }

  friend bool operator==(const Policy&, const Policy&) = default;

 private:
  void validate() const {
    for (std::size_t x = 0; x < probs_.rows(); ++x) {
      double sum = 0.0;
      for (double p : probs_.row(x)) {
        if (!(p >= 0.0) || !std::isfinite(p))
          throw DomainError("Policy: negative or non-finite probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > kRowSumTol)
        throw DomainError("Policy: row " + std::to_string(x) + " sums to " +
                          std::to_string(sum) + ", expected 1 within 1e-12");
    }
  }

  Matrix probs_;
};

// Reward values per (context, action); finite entries required.
class RewardModel {
 public:
  RewardModel() = default;
  explicit RewardModel(Matrix values) : values_(std::move(values)) {
    for (double v : values_.data())
      if (!std::isfinite(v)) throw DomainError("RewardModel: non-finite entry");
  }

  static RewardModel constant(std::size_t n_contexts, std::size_t n_actions, double c) {
    return RewardModel(Matrix(n_contexts, n_actions, c));
  }

  const Matrix& values() const { return values_; }
  double operator()(std::size_t x, std::size_t a) const { return values_(x, a); }
  std::span<const double> row(std::size_t x) const { return values_.row(x); }
  std::size_t n_contexts() const { return values_.rows(); }
  std::size_t n_actions() const { return values_.cols(); }

  friend bool operator==(const RewardModel&, const RewardModel&) = default;

 private:
  Matrix values_;
};

// Finite contextual bandit: context distribution rho, true reward r_star in
// [0, R_max], and the data-collection (reference) policy. Contexts and actions
// are dense 0-based indices; display names, if any, belong in instance
// metadata, not here.
class Instance {
 public:
  Instance() = default;
  Instance(std::vector<double> rho, RewardModel r_star, double r_max, Policy pi_ref)
      : rho_(std::move(rho)), r_star_(std::move(r_star)), r_max_(r_max),
        pi_ref_(std::move(pi_ref)) {
    validate();
  }

  std::size_t n_contexts() const { return pi_ref_.n_contexts(); }
  std::size_t n_actions() const { return pi_ref_.n_actions(); }
  const std::vector<double>& rho() const { return rho_; }
  const RewardModel& r_star() const { return r_star_; }
  double r_max() const { return r_max_; }
  const Policy& pi_ref() const { return pi_ref_; }

  friend bool operator==(const Instance&, const Instance&) = default;

 private:
  void validate() const {
    if (rho_.size() != pi_ref_.n_contexts())
      throw DimensionError("Instance: rho length vs pi_ref contexts");
    require_same_shape(r_star_.values(), pi_ref_.probs(), "Instance: r_star vs pi_ref");
    double sum = 0.0;
    for (double p : rho_) {
      if (!(p > 0.0)) throw DomainError("Instance: rho entries must be > 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTol) throw DomainError("Instance: rho must sum to 1");
    if (!(r_max_ > 0.0)) throw DomainError("Instance: R_max must be positive");
    for (double r : r_star_.values().data())
      if (r < -kRowSumTol || r > r_max_ + kRowSumTol)
        throw DomainError("Instance: r_star outside [0, R_max]");
  }

  std::vector<double> rho_;
  RewardModel r_star_;
  double r_max_ = 1.0;
  Policy pi_ref_;
};

// One labeled comparison: context, preferred action, rejected action.
// a_plus == a_minus is legal when the sampler drew a tie; it is recorded as-is.
struct PreferenceTuple {
  std::size_t x = 0;
  std::size_t a_plus = 0;
  std::size_t a_minus = 0;
  friend bool operator==(const PreferenceTuple&, const PreferenceTuple&) = default;
};

struct PreferenceDataset {
  std::vector<PreferenceTuple> tuples;

  std::size_t size() const { return tuples.size(); }
  bool empty() const { return tuples.empty(); }

  void validate_against(const Instance& instance) const {
    for (const auto& t : tuples)
      if (t.x >= instance.n_contexts() || t.a_plus >= instance.n_actions() ||
          t.a_minus >= instance.n_actions())
        throw DimensionError("PreferenceDataset: index out of range");
  }
};

// Unlabeled contexts (the D_x input of the explicit-reward pipeline).
struct ContextDataset {
  std::vector<std::size_t> contexts;

  std::size_t size() const { return contexts.size(); }
  bool empty() const { return contexts.empty(); }

  void validate_against(const Instance& instance) const {
    for (std::size_t x : contexts)
      if (x >= instance.n_contexts()) throw DimensionError("ContextDataset: index out of range");
  }
};

// J(pi) = sum_x rho(x) sum_a pi(a|x) r(x,a).
inline double expected_return(const Instance& instance, const Policy& policy,
                              const RewardModel& reward) {
  require_same_shape(policy.probs(), instance.pi_ref().probs(), "expected_return: policy");
  require_same_shape(reward.values(), instance.pi_ref().probs(), "expected_return: reward");
  double total = 0.0;
  for (std::size_t x = 0; x < instance.n_contexts(); ++x) {
    double inner = 0.0;
    for (std::size_t a = 0; a < instance.n_actions(); ++a) inner += policy(x, a) * reward(x, a);
    total += instance.rho()[x] * inner;
  }
  return total;
}

// J(comparator) - J(candidate) under the instance's true reward. Negative
// values are legal: the candidate may beat the comparator.
inline double regret(const Instance& instance, const Policy& comparator, const Policy& candidate) {
  return expected_return(instance, comparator, instance.r_star()) -
         expected_return(instance, candidate, instance.r_star());
}

}  // namespace offalign
