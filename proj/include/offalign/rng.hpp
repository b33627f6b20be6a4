#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "offalign/errors.hpp"

namespace offalign {

// splitmix64, used only to derive well-separated stream seeds from a master
// seed plus stream coordinates. mt19937_64 then provides the actual stream;
// its output sequence is pinned by the C++ standard, which is what makes the
// byte-identical-output contract portable.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0,
                              std::uint64_t d = 0) {
  std::uint64_t s = splitmix64(a);
  s = splitmix64(s ^ b);
  s = splitmix64(s ^ c);
  return splitmix64(s ^ d);
}

// Deterministic RNG stream. Distribution transforms are hand-rolled because
// the std:: distribution objects are implementation-defined and would break
// reproducibility across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Exponential(1) via inversion; uniform() < 1 keeps the log finite.
  double exponential() { return -std::log1p(-uniform()); }

  // Standard normal via Box-Muller (single draw; the pair's partner is dropped
  // to keep the stream position independent of call parity).
  double normal() {
    double u1 = 0.0;
    do { u1 = uniform(); } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Index sampled from an unnormalized weight vector by inverse CDF.
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw DomainError("Rng::categorical: weights sum to zero");
    double u = uniform() * total;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      u -= weights[i];
      if (u < 0.0) return i;
    }
    return weights.size() - 1;
  }

  // Dirichlet(1,...,1) row: normalized Exponential(1) draws.
  std::vector<double> dirichlet_uniform(std::size_t k) {
    std::vector<double> v(k);
    double total = 0.0;
    for (auto& x : v) {
      x = exponential();
      total += x;
    }
    for (auto& x : v) x /= total;
    return v;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace offalign
