#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "offalign/core.hpp"
#include "offalign/games.hpp"
#include "offalign/links.hpp"
#include "offalign/rng.hpp"

namespace offalign {

// Numerically stable sigmoid.
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(sigmoid(z)) without overflow; saturates cleanly for |z| beyond ~36.
inline double log_sigmoid(double z) {
  return (z >= 0.0) ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

inline double clip_symmetric(double z, double radius) {
  if (!std::isfinite(radius)) return z;
  return std::max(std::min(z, radius), -radius);
}

// Bradley-Terry win probability sigma(r(x,a) - r(x,b)).
inline double bt_prob(const RewardModel& r, std::size_t x, std::size_t a, std::size_t b) {
  if (x >= r.n_contexts() || a >= r.n_actions() || b >= r.n_actions())
    throw DimensionError("bt_prob: index out of range");
  return sigmoid(r(x, a) - r(x, b));
}

// n i.i.d. comparisons: x ~ rho, a,b ~ piref independently, winner labeled by
// the Bradley-Terry model under r_star. Fully determined by the seed.
inline PreferenceDataset sample_preferences(const Instance& instance, std::size_t n,
                                            std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x70726566ULL));  // dedicated stream for preference draws
  PreferenceDataset data;
  data.tuples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t x = rng.categorical(std::span<const double>(instance.rho()));
    const std::size_t a = rng.categorical(instance.pi_ref().row(x));
    const std::size_t b = rng.categorical(instance.pi_ref().row(x));
    const double p = bt_prob(instance.r_star(), x, a, b);
    const bool a_wins = rng.uniform() < p;
    data.tuples.push_back({x, a_wins ? a : b, a_wins ? b : a});
  }
  return data;
}

// Same sampling scheme under a general preference model: the winner is drawn
// from Ber((1 + ell(x,a,b))/2) instead of the Bradley-Terry probability.
inline PreferenceDataset sample_preferences_general(const Instance& instance,
                                                    const PreferenceFunction& ell, std::size_t n,
                                                    std::uint64_t seed) {
  if (ell.n_contexts() != instance.n_contexts() || ell.n_actions() != instance.n_actions())
    throw DimensionError("sample_preferences_general: preference function shape");
  Rng rng(mix_seed(seed, 0x67656e70ULL));
  PreferenceDataset data;
  data.tuples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t x = rng.categorical(std::span<const double>(instance.rho()));
    const std::size_t a = rng.categorical(instance.pi_ref().row(x));
    const std::size_t b = rng.categorical(instance.pi_ref().row(x));
    const bool a_wins = rng.uniform() < 0.5 * (1.0 + ell(x, a, b));
    data.tuples.push_back({x, a_wins ? a : b, a_wins ? b : a});
  }
  return data;
}

// -sum log sigma(clip(diff(x, a+, a-))). Sum, not mean.
template <typename DiffFn>
inline double preference_nll(DiffFn&& diffs, const PreferenceDataset& dataset,
                             double clip_radius = std::numeric_limits<double>::infinity()) {
  if (dataset.empty()) throw DomainError("preference_nll: empty dataset");
  double total = 0.0;
  for (const auto& t : dataset.tuples)
    total -= log_sigmoid(clip_symmetric(diffs(t.x, t.a_plus, t.a_minus), clip_radius));
  return total;
}

template <typename DiffFn>
inline double preference_nll_mean(DiffFn&& diffs, const PreferenceDataset& dataset,
                                  double clip_radius = std::numeric_limits<double>::infinity()) {
  return preference_nll(std::forward<DiffFn>(diffs), dataset, clip_radius) /
         static_cast<double>(dataset.size());
}

// Tie handling for finite-class argmins. Adversarial resolution picks the
// tied candidate with the smallest score (the caller supplies the score, e.g.
// true expected return of the induced policy).
struct TieBreak {
  enum class Kind { First, Last, Adversarial };
  Kind kind = Kind::First;
  std::function<double(std::size_t index)> adversarial_score;

  static TieBreak first() { return {Kind::First, nullptr}; }
  static TieBreak last() { return {Kind::Last, nullptr}; }
  static TieBreak adversarial(std::function<double(std::size_t)> score) {
    return {Kind::Adversarial, std::move(score)};
  }
};

inline constexpr double kTieTol = 1e-12;

namespace detail {

// argmin over a finite list of losses with the configured tie resolution.
inline std::size_t argmin_with_ties(const std::vector<double>& losses, const TieBreak& tie) {
  const double best = *std::min_element(losses.begin(), losses.end());
  std::vector<std::size_t> tied;
  for (std::size_t i = 0; i < losses.size(); ++i)
    if (losses[i] <= best + kTieTol) tied.push_back(i);
  switch (tie.kind) {
    case TieBreak::Kind::First:
      return tied.front();
    case TieBreak::Kind::Last:
      return tied.back();
    case TieBreak::Kind::Adversarial: {
      if (!tie.adversarial_score)
        throw ConfigError("TieBreak: adversarial kind requires a score function");
      std::size_t pick = tied.front();
      double worst = std::numeric_limits<double>::infinity();
      for (std::size_t i : tied) {
        const double s = tie.adversarial_score(i);
        if (s < worst - kTieTol) {
          worst = s;
          pick = i;
        }
      }
      return pick;
    }
  }
  return tied.front();
}

}  // namespace detail

// Maximum-likelihood reward over a finite class (argmin of the clipped NLL).
inline const RewardModel& mle_finite(const PreferenceDataset& dataset,
                                     const std::vector<RewardModel>& reward_class,
                                     double clip_radius, const TieBreak& tie) {
  if (reward_class.empty()) throw ConfigError("mle_finite: empty reward class");
  std::vector<double> losses;
  losses.reserve(reward_class.size());
  for (const auto& r : reward_class)
    losses.push_back(preference_nll(
        [&](std::size_t x, std::size_t a, std::size_t b) { return r(x, a) - r(x, b); }, dataset,
        clip_radius));
  return reward_class[detail::argmin_with_ties(losses, tie)];
}

// Loss/objective configuration shared by the preference-fitting routines.
// clip_radius = 2*r_max is the canonical choice for the chi^2 link; alpha = 0
// disables the SFT augmentation.
struct ObjectiveConfig {
  LinkSpec link = LinkSpec::mixed_chi2(1.0);
  double beta = 0.1;
  double clip_radius = std::numeric_limits<double>::infinity();
  double sft_weight_alpha = 0.0;
  double r_max = 1.0;

  static ObjectiveConfig chipo(double beta, double r_max = 1.0) {
    return {LinkSpec::mixed_chi2(1.0), beta, 2.0 * r_max, 0.0, r_max};
  }
  static ObjectiveConfig chipo_gamma(double beta, double gamma, double r_max = 1.0) {
    return {LinkSpec::mixed_chi2(gamma), beta, 2.0 * r_max, 0.0, r_max};
  }
  static ObjectiveConfig dpo(double beta, double r_max = 1.0) {
    return {LinkSpec::kl(), beta, std::numeric_limits<double>::infinity(), 0.0, r_max};
  }
  static ObjectiveConfig dpo_sft(double beta, double alpha, double r_max = 1.0) {
    return {LinkSpec::kl(), beta, std::numeric_limits<double>::infinity(), alpha, r_max};
  }

  void validate() const {
    if (!(beta > 0.0)) throw ConfigError("ObjectiveConfig: beta must be positive");
    if (!(clip_radius > 0.0)) throw ConfigError("ObjectiveConfig: clip_radius must be positive");
    if (!(sft_weight_alpha >= 0.0)) throw ConfigError("ObjectiveConfig: alpha must be >= 0");
  }
};

// Clipped implicit reward difference
//   clip( beta*phi(pi(a+|x)/piref(a+|x)) - beta*phi(pi(a-|x)/piref(a-|x)) ).
// Precomputes beta*phi(ratio) per (x, a); actions outside the reference
// support are poisoned with NaN and touching them raises a domain error.
class ImplicitDiff {
 public:
  ImplicitDiff(const Policy& policy, const Policy& pi_ref, const ObjectiveConfig& config)
      : scaled_(policy.n_contexts(), policy.n_actions()), clip_radius_(config.clip_radius) {
    require_same_shape(policy.probs(), pi_ref.probs(), "implicit_diff");
    config.validate();
    for (std::size_t x = 0; x < policy.n_contexts(); ++x)
      for (std::size_t a = 0; a < policy.n_actions(); ++a) {
        if (pi_ref(x, a) == 0.0) {
          scaled_(x, a) = std::numeric_limits<double>::quiet_NaN();
          continue;
        }
        if (!(policy(x, a) > 0.0))
          throw DomainError("implicit_diff: zero policy mass on supported action");
        scaled_(x, a) = config.beta * link_value(config.link, policy(x, a) / pi_ref(x, a));
      }
  }

  double operator()(std::size_t x, std::size_t a, std::size_t b) const {
    const double va = scaled_(x, a), vb = scaled_(x, b);
    if (std::isnan(va) || std::isnan(vb))
      throw DomainError("implicit_diff: action outside reference support");
    return clip_symmetric(va - vb, clip_radius_);
  }

  const Matrix& scaled_links() const { return scaled_; }

 private:
  Matrix scaled_;
  double clip_radius_;
};

inline ImplicitDiff implicit_diff(const Policy& policy, const Policy& pi_ref,
                                  const ObjectiveConfig& config) {
  return ImplicitDiff(policy, pi_ref, config);
}

// Preference-optimization objective as a loss (lower is better):
//   -(1/n) sum log sigma(implicit_diff)
//   - alpha * (1/n) sum_{x in dataset} E_{a~piref}[ beta*log pi(a|x) ].
// alpha = 0 with the chi^2 link is the chi^2-preference objective, alpha = 0
// with the KL link is the direct preference objective, alpha > 0 with KL adds
// the SFT term. The SFT expectation runs over dataset contexts.
inline double alignment_loss(const Policy& policy, const PreferenceDataset& dataset,
                             const Instance& instance, const ObjectiveConfig& config) {
  if (dataset.empty()) throw DomainError("alignment_loss: empty dataset");
  dataset.validate_against(instance);
  const ImplicitDiff diff(policy, instance.pi_ref(), config);
  double loss = preference_nll_mean(diff, dataset);
  if (config.sft_weight_alpha > 0.0) {
    double sft = 0.0;
    for (const auto& t : dataset.tuples) {
      for (std::size_t a = 0; a < instance.n_actions(); ++a) {
        const double ref = instance.pi_ref()(t.x, a);
        if (ref == 0.0) continue;
        sft += ref * config.beta * std::log(policy(t.x, a));
      }
    }
    loss -= config.sft_weight_alpha * sft / static_cast<double>(dataset.size());
  }
  return loss;
}

// Tabular softmax policy class: policy = row-softmax(logits).
class LogitPolicyClass {
 public:
  LogitPolicyClass() = default;
  explicit LogitPolicyClass(Matrix logits) : logits_(std::move(logits)) {
    for (double v : logits_.data())
      if (!std::isfinite(v)) throw DomainError("LogitPolicyClass: non-finite logit");
  }

  // log piref as logits reproduces piref exactly up to normalization; zero
  // reference mass maps to a large negative logit so softmax returns 0.
  static LogitPolicyClass from_policy(const Policy& policy) {
    Matrix logits(policy.n_contexts(), policy.n_actions());
    for (std::size_t x = 0; x < policy.n_contexts(); ++x)
      for (std::size_t a = 0; a < policy.n_actions(); ++a)
        logits(x, a) = policy(x, a) > 0.0 ? std::log(policy(x, a)) : -745.0;
    return LogitPolicyClass(std::move(logits));
  }

  const Matrix& logits() const { return logits_; }
  Matrix& logits() { return logits_; }

  Policy to_policy() const {
    Matrix probs(logits_.rows(), logits_.cols());
    for (std::size_t x = 0; x < logits_.rows(); ++x) {
      double m = -std::numeric_limits<double>::infinity();
      for (double v : logits_.row(x)) m = std::max(m, v);
      double sum = 0.0;
      for (std::size_t a = 0; a < logits_.cols(); ++a) {
        probs(x, a) = std::exp(logits_(x, a) - m);
        sum += probs(x, a);
      }
      for (std::size_t a = 0; a < logits_.cols(); ++a) probs(x, a) /= sum;
    }
    return Policy(std::move(probs));
  }

 private:
  Matrix logits_;
};

namespace detail {

// d phi(z) / dz for each link; the clipped exponential has zero derivative
// from its power component outside the clip band.
inline double link_derivative(const LinkSpec& spec, double z) {
  return std::visit(
      [&](const auto& link) -> double {
        using T = std::decay_t<decltype(link)>;
        if constexpr (std::is_same_v<T, KlLink>) {
          return 1.0 / z;
        } else if constexpr (std::is_same_v<T, MixedChi2Link>) {
          return 1.0 + link.gamma / z;
        } else {
          const double t = link.alpha * std::log(z);
          const double band = (t > link.clip_lo && t < link.clip_hi)
                                  ? link.alpha * std::exp(t) / z
                                  : 0.0;
          return band + link.gamma / z;
        }
      },
      spec.kind());
}

struct LossGrad {
  double loss = 0.0;
  Matrix grad;
};

// alignment_loss and its exact gradient with respect to the logits. The hard
// clip contributes zero gradient outside the band.
inline LossGrad alignment_loss_grad(const LogitPolicyClass& logits,
                                    const PreferenceDataset& dataset, const Instance& instance,
                                    const ObjectiveConfig& config) {
  const std::size_t X = instance.n_contexts(), A = instance.n_actions();
  const Policy policy = logits.to_policy();
  const double n = static_cast<double>(dataset.size());

  // scaled link values and their logit-space chain factors
  Matrix m_val(X, A, 0.0);     // beta * phi(ratio)
  Matrix m_chain(X, A, 0.0);   // beta * phi'(ratio) * ratio
  for (std::size_t x = 0; x < X; ++x)
    for (std::size_t a = 0; a < A; ++a) {
      const double ref = instance.pi_ref()(x, a);
      if (ref == 0.0) {
        m_val(x, a) = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      const double ratio = policy(x, a) / ref;
      if (!(ratio > 0.0)) throw DomainError("fit_logit_policy: ratio underflowed to zero");
      m_val(x, a) = config.beta * link_value(config.link, ratio);
      m_chain(x, a) = config.beta * link_derivative(config.link, ratio) * ratio;
    }

  LossGrad out;
  out.grad = Matrix(X, A, 0.0);
  Matrix w(X, A, 0.0);  // accumulated d loss / d m_val
  for (const auto& t : dataset.tuples) {
    const double raw = m_val(t.x, t.a_plus) - m_val(t.x, t.a_minus);
    if (std::isnan(raw)) throw DomainError("fit_logit_policy: tuple outside reference support");
    const double clipped = clip_symmetric(raw, config.clip_radius);
    out.loss -= log_sigmoid(clipped) / n;
    if (std::abs(raw) <= config.clip_radius) {
      const double coeff = -sigmoid(-clipped) / n;
      w(t.x, t.a_plus) += coeff;
      w(t.x, t.a_minus) -= coeff;
    }
  }

  // chain rule through the softmax: d m_val(x,a) / d theta(x,c)
  //   = m_chain(x,a) * (delta_{ac} - pi(c|x))
  for (std::size_t x = 0; x < X; ++x) {
    double dot = 0.0;
    for (std::size_t a = 0; a < A; ++a) dot += w(x, a) * m_chain(x, a);
    for (std::size_t c = 0; c < A; ++c)
      out.grad(x, c) += w(x, c) * m_chain(x, c) - policy(x, c) * dot;
  }

  if (config.sft_weight_alpha > 0.0) {
    std::vector<double> context_count(X, 0.0);
    for (const auto& t : dataset.tuples) context_count[t.x] += 1.0;
    for (std::size_t x = 0; x < X; ++x) {
      if (context_count[x] == 0.0) continue;
      const double wx = context_count[x] / n;
      double sft = 0.0;
      for (std::size_t a = 0; a < A; ++a) {
        const double ref = instance.pi_ref()(x, a);
        if (ref == 0.0) continue;
        sft += ref * std::log(policy(x, a));
      }
      out.loss -= config.sft_weight_alpha * config.beta * wx * sft;
      for (std::size_t c = 0; c < A; ++c)
        out.grad(x, c) -= config.sft_weight_alpha * config.beta * wx *
                          (instance.pi_ref()(x, c) - policy(x, c));
    }
  }
  return out;
}

}  // namespace detail

struct FitOptions {
  double lr = 0.5;
  std::size_t steps = 2000;
  Matrix init_logits;  // empty -> log piref
  double grad_clip = std::numeric_limits<double>::infinity();
};

// Full-batch gradient descent on alignment_loss over tabular logits.
// Deterministic given the options; returns the iterate with the lowest loss.
inline Policy fit_logit_policy(const Instance& instance, const PreferenceDataset& dataset,
                               const ObjectiveConfig& config, const FitOptions& opt) {
  if (opt.steps < 1) throw ConfigError("fit_logit_policy: steps must be >= 1");
  config.validate();
  if (dataset.empty()) throw DomainError("fit_logit_policy: empty dataset");
  dataset.validate_against(instance);

  LogitPolicyClass current =
      opt.init_logits.rows() == 0
          ? LogitPolicyClass::from_policy(instance.pi_ref())
          : LogitPolicyClass(opt.init_logits);
  if (!current.logits().same_shape(instance.pi_ref().probs()))
    throw DimensionError("fit_logit_policy: init_logits shape");

  Matrix best_logits = current.logits();
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t step = 0; step < opt.steps; ++step) {
    auto lg = detail::alignment_loss_grad(current, dataset, instance, config);
    if (!std::isfinite(lg.loss))
      throw SolverError("fit_logit_policy: non-finite loss at step " + std::to_string(step));
    if (lg.loss < best_loss) {
      best_loss = lg.loss;
      best_logits = current.logits();
    }
    for (std::size_t i = 0; i < lg.grad.data().size(); ++i) {
      const double g = clip_symmetric(lg.grad.data()[i], opt.grad_clip);
      current.logits().data()[i] -= opt.lr * g;
    }
  }
  auto final_lg = detail::alignment_loss_grad(current, dataset, instance, config);
  if (std::isfinite(final_lg.loss) && final_lg.loss < best_loss) {
    best_loss = final_lg.loss;
    best_logits = current.logits();
  }
  return LogitPolicyClass(best_logits).to_policy();
}

// Least-squares preference regression over a finite skew-symmetric class:
// argmin sum (ell(x, a+, a-) - 1)^2, first index wins ties.
inline const PreferenceFunction& ls_pref_fit(const PreferenceDataset& dataset,
                                             const std::vector<PreferenceFunction>& pref_class) {
  if (pref_class.empty()) throw ConfigError("ls_pref_fit: empty preference class");
  std::vector<double> losses;
  losses.reserve(pref_class.size());
  for (const auto& l : pref_class) {
    double loss = 0.0;
    for (const auto& t : dataset.tuples) {
      const double resid = l(t.x, t.a_plus, t.a_minus) - 1.0;
      loss += resid * resid;
    }
    losses.push_back(loss);
  }
  return pref_class[detail::argmin_with_ties(losses, TieBreak::first())];
}

}  // namespace offalign
