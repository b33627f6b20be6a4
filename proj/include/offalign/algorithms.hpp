#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include "offalign/core.hpp"
#include "offalign/estimation.hpp"
#include "offalign/games.hpp"
#include "offalign/rng.hpp"
#include "offalign/solvers.hpp"

namespace offalign {

// Policy class driving the offline-alignment optimizer: either free tabular
// logits trained by gradient descent, or the finite class induced by a reward
// class through the link's reparameterization
//   pi_r(a|x) = piref(a|x) * phi^{-1}((r(x,a) - Z_r(x))/beta).
struct TabularLogitClass {
  FitOptions opt;
};

struct RewardInducedClass {
  std::vector<RewardModel> reward_class;
  LinkSpec link = LinkSpec::mixed_chi2(1.0);
  double beta = 0.1;
};

using PolicyClassSpec = std::variant<TabularLogitClass, RewardInducedClass>;

// The induced policy for one reward model.
inline Policy induced_policy(const Instance& instance, const RewardModel& reward, double beta,
                             const LinkSpec& link) {
  return solve_regularized(instance, reward, beta, link).policy;
}

// Offline alignment driver. With a tabular logit class this runs gradient
// descent on the configured objective; with a reward-induced class it selects
// a reward model from the finite class and returns its induced policy, which
// for alpha = 0 is exactly maximum likelihood followed by the regularized
// solve. Adversarial tie-breaking scores candidates by the true expected
// return of their induced policies.
inline Policy run_offline_alignment(const Instance& instance, const PreferenceDataset& dataset,
                                    const PolicyClassSpec& class_spec,
                                    const ObjectiveConfig& config,
                                    const TieBreak& tie = TieBreak::first()) {
  config.validate();
  if (const auto* logit = std::get_if<TabularLogitClass>(&class_spec))
    return fit_logit_policy(instance, dataset, config, logit->opt);

  const auto& induced = std::get<RewardInducedClass>(class_spec);
  if (induced.reward_class.empty())
    throw ConfigError("run_offline_alignment: empty reward class");
  if (induced.beta != config.beta || !(induced.link == config.link))
    throw ConfigError("run_offline_alignment: class link/beta disagree with objective config");

  TieBreak resolved = tie;
  if (tie.kind == TieBreak::Kind::Adversarial && !tie.adversarial_score) {
    resolved.adversarial_score = [&](std::size_t i) {
      return expected_return(
          instance, induced_policy(instance, induced.reward_class[i], config.beta, config.link),
          instance.r_star());
    };
  }

  if (config.sft_weight_alpha == 0.0) {
    const RewardModel& pick =
        mle_finite(dataset, induced.reward_class, config.clip_radius, resolved);
    return induced_policy(instance, pick, config.beta, config.link);
  }

  // SFT-augmented selection: score each candidate's induced policy by the full
  // objective (mean clipped NLL minus the weighted SFT term).
  std::vector<double> losses;
  losses.reserve(induced.reward_class.size());
  for (const auto& r : induced.reward_class) {
    const Policy pi = induced_policy(instance, r, config.beta, config.link);
    losses.push_back(alignment_loss(pi, dataset, instance, config));
  }
  const std::size_t pick = detail::argmin_with_ties(losses, resolved);
  return induced_policy(instance, induced.reward_class[pick], config.beta, config.link);
}

// Explicit-reward pipeline: maximum likelihood over the reward class with
// unclipped differences, then the exact smoothed-chi^2 solve on the contexts
// present in the unlabeled dataset. Contexts never observed inherit piref.
// The recommended smoothing range is eta in [0, beta/(8 R_max)].
inline Policy run_chi2_rlhf(const Instance& instance, const PreferenceDataset& dpref,
                            const ContextDataset& dx,
                            const std::vector<RewardModel>& reward_class, double beta, double eta,
                            const TieBreak& tie = TieBreak::first()) {
  if (dx.empty()) throw ConfigError("run_chi2_rlhf: unlabeled context dataset is empty");
  dx.validate_against(instance);

  TieBreak resolved = tie;
  if (tie.kind == TieBreak::Kind::Adversarial && !tie.adversarial_score) {
    resolved.adversarial_score = [&](std::size_t i) {
      return expected_return(
          instance, solve_smoothed_chi2(instance, reward_class[i], beta, eta),
          instance.r_star());
    };
  }
  const RewardModel& pick =
      mle_finite(dpref, reward_class, std::numeric_limits<double>::infinity(), resolved);
  const Policy solved = solve_smoothed_chi2(instance, pick, beta, eta);

  std::unordered_set<std::size_t> seen(dx.contexts.begin(), dx.contexts.end());
  Matrix probs = instance.pi_ref().probs();
  for (std::size_t x : seen)
    for (std::size_t a = 0; a < instance.n_actions(); ++a) probs(x, a) = solved(x, a);
  return Policy(std::move(probs));
}

struct IterativeChiPOConfig {
  double beta = 0.125;
  double eta = 0.5;
  std::size_t iterations = 64;       // T
  std::size_t unlabeled_samples = 1; // m; feeds the regression variant
  double clip = 4.0;
  // When set, the mirror step is replaced by gradient-descent least-squares
  // regression of the policy-dependent predictor on the unlabeled triples,
  // matching the sampled algorithm statement rather than its exact tabular
  // stationary point.
  bool regression_fit = false;
  FitOptions regression_opt{0.5, 1500, {}, std::numeric_limits<double>::infinity()};

  void validate() const {
    if (!(beta > 0.0) || !(eta > 0.0))
      throw ConfigError("IterativeChiPOConfig: beta, eta must be positive");
    if (iterations < 1) throw ConfigError("IterativeChiPOConfig: T must be >= 1");
    if (unlabeled_samples < 1) throw ConfigError("IterativeChiPOConfig: m must be >= 1");
  }
};

namespace detail {

struct UnlabeledTriple {
  std::size_t x, a, b;
};

// Least-squares regression variant of the iterative update: minimize over
// logits the empirical squared error between the clipped policy-dependent
// predictor and the sampled relative reward.
inline Policy regression_mirror_step(const Instance& instance, const Policy& pi_t,
                                     const RewardModel& r_hat,
                                     const std::vector<UnlabeledTriple>& triples,
                                     const IterativeChiPOConfig& cfg) {
  const std::size_t X = instance.n_contexts(), A = instance.n_actions();
  const LinkSpec chi = LinkSpec::mixed_chi2(1.0);
  const double w_new = cfg.beta * (1.0 + 1.0 / cfg.eta);
  const double w_old = cfg.beta / cfg.eta;

  Matrix m_old(X, A, 0.0);
  for (std::size_t x = 0; x < X; ++x)
    for (std::size_t a = 0; a < A; ++a)
      if (instance.pi_ref()(x, a) > 0.0)
        m_old(x, a) = link_value(chi, pi_t(x, a) / instance.pi_ref()(x, a));

  LogitPolicyClass current = LogitPolicyClass::from_policy(pi_t);
  Matrix best_logits = current.logits();
  double best_loss = std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(triples.size());

  for (std::size_t step = 0; step < cfg.regression_opt.steps; ++step) {
    const Policy pol = current.to_policy();
    Matrix m_new(X, A, 0.0), chain(X, A, 0.0), w(X, A, 0.0);
    for (std::size_t x = 0; x < X; ++x)
      for (std::size_t a = 0; a < A; ++a) {
        const double ref = instance.pi_ref()(x, a);
        if (ref == 0.0) continue;
        const double ratio = pol(x, a) / ref;
        m_new(x, a) = link_value(chi, ratio);
        chain(x, a) = w_new * detail::link_derivative(chi, ratio) * ratio;
      }
    double loss = 0.0;
    for (const auto& t : triples) {
      const double f = w_new * (m_new(t.x, t.a) - m_new(t.x, t.b)) -
                       w_old * (m_old(t.x, t.a) - m_old(t.x, t.b));
      const double clipped = clip_symmetric(f, cfg.clip);
      const double target = r_hat(t.x, t.a) - r_hat(t.x, t.b);
      const double resid = clipped - target;
      loss += resid * resid / n;
      if (std::abs(f) <= cfg.clip) {
        const double coeff = 2.0 * resid / n;
        w(t.x, t.a) += coeff;
        w(t.x, t.b) -= coeff;
      }
    }
    if (!std::isfinite(loss))
      throw SolverError("regression_mirror_step: non-finite loss");
    if (loss < best_loss) {
      best_loss = loss;
      best_logits = current.logits();
    }
    Matrix grad(X, A, 0.0);
    for (std::size_t x = 0; x < X; ++x) {
      double dot = 0.0;
      for (std::size_t a = 0; a < A; ++a) dot += w(x, a) * chain(x, a);
      for (std::size_t c = 0; c < A; ++c)
        grad(x, c) = w(x, c) * chain(x, c) - pol(x, c) * dot;
    }
    for (std::size_t i = 0; i < grad.data().size(); ++i)
      current.logits().data()[i] -=
          cfg.regression_opt.lr * clip_symmetric(grad.data()[i], cfg.regression_opt.grad_clip);
  }
  return LogitPolicyClass(best_logits).to_policy();
}

}  // namespace detail

struct IterativeChiPOResult {
  Policy mixture;
  std::vector<Policy> iterates;
};

// Self-play driver for general preferences: fit the preference function by
// least squares, then iterate the Bregman mirror step on the sampled
// one-point reward r^t(x, a) = ell_hat(x, a, b_t), b_t ~ pi^t(x). Returns the
// uniform mixture over iterates. At tabular scale the regression step is
// realizable with zero loss, so the default path computes its stationary
// solution (mirror_step) exactly; the sampled-regression variant is kept
// behind IterativeChiPOConfig::regression_fit.
inline IterativeChiPOResult run_iterative_chipo(const Instance& instance,
                                                const PreferenceDataset& dpref,
                                                const std::vector<PreferenceFunction>& pref_class,
                                                const IterativeChiPOConfig& cfg,
                                                std::uint64_t seed) {
  cfg.validate();
  const PreferenceFunction& ell = ls_pref_fit(dpref, pref_class);
  const std::size_t X = instance.n_contexts(), A = instance.n_actions();

  Rng rng(mix_seed(seed, 0x69746572ULL));
  std::vector<detail::UnlabeledTriple> triples;
  triples.reserve(cfg.unlabeled_samples);
  for (std::size_t i = 0; i < cfg.unlabeled_samples; ++i) {
    const std::size_t x = rng.categorical(std::span<const double>(instance.rho()));
    const std::size_t a = rng.categorical(instance.pi_ref().row(x));
    const std::size_t b = rng.categorical(instance.pi_ref().row(x));
    triples.push_back({x, a, b});
  }

  IterativeChiPOResult result;
  result.iterates.push_back(instance.pi_ref());
  for (std::size_t t = 0; t + 1 < cfg.iterations; ++t) {
    const Policy& pi_t = result.iterates.back();
    Matrix r_hat(X, A, 0.0);
    for (std::size_t x = 0; x < X; ++x) {
      const std::size_t b_t = rng.categorical(pi_t.row(x));
      for (std::size_t a = 0; a < A; ++a) r_hat(x, a) = ell(x, a, b_t);
    }
    const RewardModel reward{std::move(r_hat)};
    if (cfg.regression_fit) {
      if (triples.empty())
        throw ConfigError("run_iterative_chipo: regression variant needs unlabeled samples");
      result.iterates.push_back(
          detail::regression_mirror_step(instance, pi_t, reward, triples, cfg));
    } else {
      result.iterates.push_back(mirror_step(instance, pi_t, reward, cfg.beta, cfg.eta).policy);
    }
  }

  Matrix mix(X, A, 0.0);
  for (const auto& pol : result.iterates)
    for (std::size_t i = 0; i < mix.data().size(); ++i) mix.data()[i] += pol.probs().data()[i];
  for (auto& v : mix.data()) v /= static_cast<double>(result.iterates.size());
  result.mixture = Policy(std::move(mix));
  return result;
}

}  // namespace offalign
