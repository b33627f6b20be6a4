#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <variant>

#include "offalign/errors.hpp"

namespace offalign {

// Link function family mapping density ratios z = pi/piref to implicit
// rewards. KL is the plain logarithm; MixedChi2 is z + gamma*log(z), whose
// chi^2 component supplies pessimism while the log barrier keeps the
// reparameterization invertible. AlphaMixed is the clipped power variant
// exp(clip(alpha*log z)) + gamma*log z used for stabilized training runs.
struct KlLink {
  friend bool operator==(const KlLink&, const KlLink&) = default;
};

struct MixedChi2Link {
  double gamma = 1.0;
  friend bool operator==(const MixedChi2Link&, const MixedChi2Link&) = default;
};

struct AlphaMixedLink {
  double alpha = 1.0;
  double gamma = 1.0;
  double clip_lo = -88.0;  // clip bounds act on alpha*log(z) before exponentiation
  double clip_hi = 20.0;
  friend bool operator==(const AlphaMixedLink&, const AlphaMixedLink&) = default;
};

class LinkSpec {
 public:
  using Kind = std::variant<KlLink, MixedChi2Link, AlphaMixedLink>;

  static LinkSpec kl() { return LinkSpec(KlLink{}); }

  static LinkSpec mixed_chi2(double gamma = 1.0) {
    if (!(gamma > 0.0 && gamma <= 1.0))
      throw DomainError("LinkSpec: gamma must lie in (0, 1]");
    return LinkSpec(MixedChi2Link{gamma});
  }

  static LinkSpec alpha_mixed(double alpha, double gamma, double clip_lo = -88.0,
                              double clip_hi = 20.0) {
    if (!(alpha > 0.0 && alpha <= 1.0))
      throw DomainError("LinkSpec: alpha must lie in (0, 1]");
    if (!(gamma > 0.0 && gamma <= 1.0))
      throw DomainError("LinkSpec: gamma must lie in (0, 1]");
    if (!(clip_lo < clip_hi)) throw DomainError("LinkSpec: clip_lo must be < clip_hi");
    return LinkSpec(AlphaMixedLink{alpha, gamma, clip_lo, clip_hi});
  }

  const Kind& kind() const { return kind_; }
  bool is_kl() const { return std::holds_alternative<KlLink>(kind_); }

  friend bool operator==(const LinkSpec&, const LinkSpec&) = default;

 private:
  explicit LinkSpec(Kind kind) : kind_(kind) {}
  Kind kind_{MixedChi2Link{1.0}};
};

// phi(z) for the given link. Domain z > 0.
inline double link_value(const LinkSpec& spec, double z) {
  if (!(z > 0.0)) throw DomainError("link_value: z must be positive, got " + std::to_string(z));
  const double log_z = std::log(z);
  return std::visit(
      [&](const auto& link) -> double {
        using T = std::decay_t<decltype(link)>;
        if constexpr (std::is_same_v<T, KlLink>) {
          return log_z;
        } else if constexpr (std::is_same_v<T, MixedChi2Link>) {
          return z + link.gamma * log_z;
        } else {
          const double clipped = std::clamp(link.alpha * log_z, link.clip_lo, link.clip_hi);
          return std::exp(clipped) + link.gamma * log_z;
        }
      },
      spec.kind());
}

// Principal branch of the Lambert W function: the w >= -1 solving w*e^w = y,
// defined for y >= -1/e. Halley iteration; residual stop at 1e-13 relative.
inline double lambert_w0(double y) {
  constexpr double kNegInvE = -0.36787944117144232160;  // -1/e
  if (!std::isfinite(y)) throw DomainError("lambert_w0: non-finite argument");
  if (y < kNegInvE) {
    if (y > kNegInvE - 1e-15) {
      y = kNegInvE;  // representation slop at the branch point
    } else {
      throw DomainError("lambert_w0: argument below -1/e");
    }
  }
  if (y == 0.0) return 0.0;

  double w;
  if (y < -0.25) {
    // series around the branch point in p = sqrt(2*(e*y + 1))
    const double p = std::sqrt(std::max(0.0, 2.0 * (2.7182818284590452354 * y + 1.0)));
    w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
  } else if (y < 0.0) {
    w = y;  // W0(y) ~ y for small |y|
  } else {
    w = std::log1p(y);
  }

  const double scale = std::max(1.0, std::abs(y));
  for (int iter = 0; iter < 50; ++iter) {
    const double ew = std::exp(w);
    const double f = w * ew - y;
    if (std::abs(f) <= 1e-13 * scale) break;
    const double wp1 = w + 1.0;
    const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
    const double step = f / denom;
    w -= step;
    if (w < -1.0) w = -1.0 + 1e-16;
  }
  return w;
}

namespace detail {

// Solve e^t + gamma*t = y for t = log(z). Working in log-space keeps the
// problem well conditioned when the solution ratio is astronomically small
// (the exp term vanishes and t ~ y/gamma).
inline double solve_exp_linear(double gamma, double y) {
  double t_lo, t_hi;
  if (y >= 1.0) {
    t_lo = 0.0;
    t_hi = std::log(y) + 1.0;
  } else {
    t_lo = (y - 2.7182818284590452354) / gamma;
    t_hi = 1.0;
  }
  const double tol = 1e-13 * std::max(1.0, std::abs(y));
  double t = 0.5 * (t_lo + t_hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double et = (t < 709.0) ? std::exp(t) : std::numeric_limits<double>::infinity();
    const double f = et + gamma * t - y;
    if (std::isfinite(f) && std::abs(f) <= tol) break;
    if (f > 0.0) t_hi = t; else t_lo = t;
    double t_newton = t - f / (et + gamma);
    if (std::isfinite(t_newton) && t_newton > t_lo && t_newton < t_hi) {
      t = t_newton;
    } else {
      t = 0.5 * (t_lo + t_hi);
    }
  }
  return t;
}

// Solve exp(clip(alpha*t)) + gamma*t = y for t = log(z). Strictly increasing
// in t since gamma > 0; the exp term is flat outside the clip band.
inline double solve_alpha_mixed(const AlphaMixedLink& link, double y) {
  const auto value = [&](double t) {
    const double clipped = std::clamp(link.alpha * t, link.clip_lo, link.clip_hi);
    return std::exp(clipped) + link.gamma * t;
  };
  // bracket by doubling
  double t_lo = -1.0, t_hi = 1.0;
  for (int i = 0; i < 200 && value(t_lo) > y; ++i) t_lo *= 2.0;
  for (int i = 0; i < 200 && value(t_hi) < y; ++i) t_hi *= 2.0;
  if (value(t_lo) > y || value(t_hi) < y)
    throw SolverError("link_inverse: failed to bracket alpha-mixed inverse at y=" +
                      std::to_string(y));
  const double tol = 1e-13 * std::max(1.0, std::abs(y));
  double t = 0.5 * (t_lo + t_hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double f = value(t) - y;
    if (std::abs(f) <= tol) break;
    if (f > 0.0) t_hi = t; else t_lo = t;
    const bool in_band = link.alpha * t > link.clip_lo && link.alpha * t < link.clip_hi;
    const double deriv =
        link.gamma + (in_band ? link.alpha * std::exp(link.alpha * t) : 0.0);
    const double t_newton = t - f / deriv;
    if (std::isfinite(t_newton) && t_newton > t_lo && t_newton < t_hi) {
      t = t_newton;
    } else {
      t = 0.5 * (t_lo + t_hi);
    }
  }
  return t;
}

}  // namespace detail

// phi^{-1}(y): the positive z with link_value(spec, z) = y, to 1e-10 in
// y-space. The gamma = 1 mixed link uses W0(exp(y)) directly, switching to the
// asymptotic expansion plus Newton polish where exp(y) would overflow.
inline double link_inverse(const LinkSpec& spec, double y) {
  if (!std::isfinite(y)) throw DomainError("link_inverse: non-finite target");
  return std::visit(
      [&](const auto& link) -> double {
        using T = std::decay_t<decltype(link)>;
        if constexpr (std::is_same_v<T, KlLink>) {
          if (y > 709.0) throw DomainError("link_inverse: exp overflow for KL link");
          return std::exp(y);
        } else if constexpr (std::is_same_v<T, MixedChi2Link>) {
          if (link.gamma == 1.0) {
            if (y > 690.0) {
              // W0(e^y) ~ y - log y + log(y)/y, then Newton in phi-space
              const double ly = std::log(y);
              double z = y - ly + ly / y;
              for (int i = 0; i < 4; ++i)
                z -= (z + std::log(z) - y) / (1.0 + 1.0 / z);
              return z;
            }
            // below ~-700 the inverse equals exp(y) to machine precision;
            // past -745 that underflows to subnormals and finally zero, the
            // correct limiting value for row sums at tiny beta
            if (y < -700.0) return std::exp(y);
            // polish the W0 value in phi-space: the Lambert residual stop is
            // relative to e^y, which is far looser than 1e-10 in y when y < 0
            double z = lambert_w0(std::exp(y));
            for (int i = 0; i < 2 && z > 0.0; ++i)
              z -= (z + std::log(z) - y) / (1.0 + 1.0 / z);
            return z;
          }
          return std::exp(detail::solve_exp_linear(link.gamma, y));
        } else {
          return std::exp(detail::solve_alpha_mixed(link, y));
        }
      },
      spec.kind());
}

}  // namespace offalign
