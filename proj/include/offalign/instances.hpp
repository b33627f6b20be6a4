#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "offalign/core.hpp"
#include "offalign/games.hpp"
#include "offalign/rng.hpp"

namespace offalign {

// A canonical construction bundled with whatever auxiliary objects it comes
// with: a finite reward class, a preference function, or both.
struct NamedInstance {
  Instance instance;
  std::vector<RewardModel> reward_class;
  std::optional<PreferenceFunction> pref;
  std::string metadata;
};

// Single-context four-action instance with reference
//   piref = (1/2, 1/(2n), 1/(2n), (n-2)/(2n))
// and reward class {r1, r2}, r_i(a0) = 1/2, r_i(a_i) = 1, zero elsewhere.
// The true reward is r1. n = 2 puts zero reference mass on a3; ratio
// computations downstream are support-aware, so this is representable.
inline NamedInstance illustrative(std::size_t n) {
  if (n < 2) throw DomainError("illustrative: n must be >= 2");
  const double dn = static_cast<double>(n);
  Matrix ref(1, 4);
  ref(0, 0) = 0.5;
  ref(0, 1) = 1.0 / (2.0 * dn);
  ref(0, 2) = 1.0 / (2.0 * dn);
  ref(0, 3) = (dn - 2.0) / (2.0 * dn);

  Matrix r1(1, 4, 0.0), r2(1, 4, 0.0);
  r1(0, 0) = 0.5; r1(0, 1) = 1.0;
  r2(0, 0) = 0.5; r2(0, 2) = 1.0;

  NamedInstance out;
  out.instance = Instance({1.0}, RewardModel(r1), 1.0, Policy(std::move(ref)));
  out.reward_class = {RewardModel(r1), RewardModel(r2)};
  out.metadata = "illustrative(n=" + std::to_string(n) + ")";
  return out;
}

inline double rpo_lower_default_zeta(std::size_t n) {
  return std::log(2.0) / (2.0 * std::log(static_cast<double>(n)));
}

// Two-context lower-bound construction against the SFT-augmented objective:
// context x1 carries reward zeta on a0 only, context x2 repeats the
// illustrative rewards; the comparator of interest is the point mass on a0.
inline NamedInstance rpo_lower(std::size_t n, std::optional<double> zeta_opt = std::nullopt) {
  if (n < 2) throw DomainError("rpo_lower: n must be >= 2");
  const double zeta = zeta_opt.value_or(rpo_lower_default_zeta(n));
  if (!(zeta >= 0.0 && zeta <= 1.0)) throw DomainError("rpo_lower: zeta must lie in [0, 1]");
  const double dn = static_cast<double>(n);

  Matrix ref(2, 4);
  for (std::size_t x = 0; x < 2; ++x) {
    ref(x, 0) = 0.5;
    ref(x, 1) = 1.0 / (2.0 * dn);
    ref(x, 2) = 1.0 / (2.0 * dn);
    ref(x, 3) = (dn - 2.0) / (2.0 * dn);
  }
  Matrix r1(2, 4, 0.0), r2(2, 4, 0.0);
  r1(0, 0) = zeta;          r2(0, 0) = zeta;
  r1(1, 0) = 0.5; r1(1, 1) = 1.0;
  r2(1, 0) = 0.5; r2(1, 2) = 1.0;

  NamedInstance out;
  out.instance = Instance({0.5, 0.5}, RewardModel(r1), 1.0, Policy(std::move(ref)));
  out.reward_class = {RewardModel(r1), RewardModel(r2)};
  out.metadata = "rpo_lower(n=" + std::to_string(n) + ", zeta=" + std::to_string(zeta) + ")";
  return out;
}

// Impossibility pair for general preferences: one context, actions
// {a, b, c, d} with piref = (1/C, 1/C, 1-2/C, 0), and two preference
// functions that agree everywhere on the sampled support {a, b, c} yet have
// disjoint minimax winners (a for the first, b for the second). C = 2 zeroes
// out c's reference mass as well; the support-aware machinery handles it.
inline std::pair<NamedInstance, NamedInstance> general_lower(double C = 2.0) {
  if (!(C >= 2.0)) throw DomainError("general_lower: C must be >= 2");
  Matrix ref(1, 4);
  ref(0, 0) = 1.0 / C;
  ref(0, 1) = 1.0 / C;
  ref(0, 2) = 1.0 - 2.0 / C;
  ref(0, 3) = 0.0;
  Policy piref(std::move(ref));
  const RewardModel zero_reward = RewardModel::constant(1, 4, 0.0);

  // nonzero entries involve action d (index 3) only
  const auto make = [&](double ad, double bd, double cd) {
    return PreferenceFunction::from_upper(1, 4, [&](std::size_t, std::size_t a, std::size_t b) {
      if (b != 3) return 0.0;
      if (a == 0) return ad;
      if (a == 1) return bd;
      return cd;
    });
  };

  NamedInstance one, two;
  one.instance = Instance({1.0}, zero_reward, 1.0, piref);
  one.pref = make(0.0, -1.0, 1.0);
  one.metadata = "general_lower(C=" + std::to_string(C) + ", variant=1)";
  two.instance = Instance({1.0}, zero_reward, 1.0, piref);
  two.pref = make(-1.0, 0.0, -1.0);
  two.metadata = "general_lower(C=" + std::to_string(C) + ", variant=2)";
  return {std::move(one), std::move(two)};
}

// True iff no tuple mentions a forbidden action on either side.
inline bool bad_event_holds(const PreferenceDataset& dataset,
                            const std::vector<std::size_t>& forbidden_actions) {
  std::unordered_set<std::size_t> forbidden(forbidden_actions.begin(), forbidden_actions.end());
  for (const auto& t : dataset.tuples)
    if (forbidden.count(t.a_plus) || forbidden.count(t.a_minus)) return false;
  return true;
}

// Seeded random instance: Dirichlet(1) context distribution and reference
// rows, uniform rewards in [0, r_max].
inline NamedInstance random_instance(std::uint64_t seed, std::size_t n_contexts,
                                     std::size_t n_actions, double r_max = 1.0) {
  if (n_contexts < 1 || n_actions < 1)
    throw DomainError("random_instance: dimensions must be >= 1");
  Rng rng(mix_seed(seed, 0x696e7374ULL));
  std::vector<double> rho = rng.dirichlet_uniform(n_contexts);
  Matrix ref(n_contexts, n_actions);
  for (std::size_t x = 0; x < n_contexts; ++x) {
    auto row = rng.dirichlet_uniform(n_actions);
    for (std::size_t a = 0; a < n_actions; ++a) ref(x, a) = row[a];
  }
  Matrix r(n_contexts, n_actions);
  for (auto& v : r.data()) v = rng.uniform(0.0, r_max);

  NamedInstance out;
  out.instance = Instance(std::move(rho), RewardModel(std::move(r)), r_max, Policy(std::move(ref)));
  out.metadata = "random(seed=" + std::to_string(seed) + ")";
  return out;
}

}  // namespace offalign
