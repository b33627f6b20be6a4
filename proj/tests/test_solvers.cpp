#include <catch_amalgamated.hpp>

#include <cmath>

#include "offalign/divergences.hpp"
#include "offalign/instances.hpp"
#include "offalign/solvers.hpp"
#include "testutil.hpp"

using namespace offalign;

namespace {
constexpr double kE = 2.7182818284590452354;

double row_objective(const Instance& inst, const Policy& pi, const RewardModel& r, double beta,
                     double gamma, std::size_t x) {
  std::vector<double> p(pi.row(x).begin(), pi.row(x).end());
  return testutil::mixed_objective_row(p, inst.pi_ref().row(x), r.row(x), beta, gamma);
}
}  // namespace

TEST_CASE("constant reward is a fixed point for every link") {
  const auto named = random_instance(42, 3, 5);
  const Instance& inst = named.instance;
  const RewardModel c = RewardModel::constant(3, 5, 0.8);

  const auto chi = solve_regularized(inst, c, 0.3, LinkSpec::mixed_chi2(1.0));
  for (std::size_t x = 0; x < 3; ++x) {
    for (std::size_t a = 0; a < 5; ++a)
      CHECK_THAT(chi.policy(x, a), Catch::Matchers::WithinAbs(inst.pi_ref()(x, a), 1e-10));
    // phi(1) = 1 forces (c - Z)/beta = 1
    CHECK_THAT(chi.z[x], Catch::Matchers::WithinAbs(0.8 - 0.3, 1e-9));
  }

  const auto kl = solve_regularized(inst, c, 0.3, LinkSpec::kl());
  for (std::size_t x = 0; x < 3; ++x)
    for (std::size_t a = 0; a < 5; ++a)
      CHECK_THAT(kl.policy(x, a), Catch::Matchers::WithinAbs(inst.pi_ref()(x, a), 1e-12));
}

TEST_CASE("mixed chi2 solve agrees with the projected-gradient oracle") {
  const auto named = illustrative(10);
  const Instance& inst = named.instance;
  const RewardModel& r2 = named.reward_class[1];
  const double beta = 0.05;

  const auto solved = solve_regularized(inst, r2, beta, LinkSpec::mixed_chi2(1.0));
  const auto oracle = testutil::pga_mixed_oracle(inst.pi_ref().row(0), r2.row(0), beta);
  for (std::size_t a = 0; a < 4; ++a)
    CHECK_THAT(solved.policy(0, a), Catch::Matchers::WithinAbs(oracle[a], 1e-6));
}

TEST_CASE("density ratio bounds for the mixed chi2 policy") {
  Rng rng(5);
  for (int trial = 0; trial < 60; ++trial) {
    const auto named = random_instance(9000 + trial, 1 + trial % 4, 2 + trial % 5);
    const Instance& inst = named.instance;
    const double beta = std::exp(rng.uniform(std::log(0.01), std::log(10.0)));
    const auto res = solve_regularized(inst, inst.r_star(), beta, LinkSpec::mixed_chi2(1.0));
    const double upper = 1.0 + inst.r_max() / beta;
    const double lower = std::exp(-kE) * std::exp(-inst.r_max() / beta);
    for (std::size_t x = 0; x < inst.n_contexts(); ++x)
      for (std::size_t a = 0; a < inst.n_actions(); ++a) {
        const double ratio = res.policy(x, a) / inst.pi_ref()(x, a);
        CHECK(ratio <= upper * (1.0 + 1e-9));
        CHECK(ratio >= lower * (1.0 - 1e-9));
      }
  }
}

TEST_CASE("softmax ratio bounds for the KL policy") {
  Rng rng(6);
  for (int trial = 0; trial < 40; ++trial) {
    const auto named = random_instance(500 + trial, 2, 4);
    const Instance& inst = named.instance;
    const double beta = std::exp(rng.uniform(std::log(0.05), std::log(5.0)));
    const auto res = solve_regularized(inst, inst.r_star(), beta, LinkSpec::kl());
    for (std::size_t x = 0; x < inst.n_contexts(); ++x)
      for (std::size_t a = 0; a < inst.n_actions(); ++a) {
        const double ratio = res.policy(x, a) / inst.pi_ref()(x, a);
        CHECK(ratio <= std::exp(inst.r_max() / beta) * (1.0 + 1e-9));
        CHECK(ratio >= std::exp(-inst.r_max() / beta) / kE * (1.0 - 1e-9));
      }
  }
}

TEST_CASE("reward-to-policy round trip recovers the policy") {
  Rng rng(7);
  int gamma_idx = 0;
  const double gammas[] = {0.1, 0.5, 1.0};
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t X = 1 + trial % 3, A = 2 + trial % 5;
    const auto named = random_instance(3100 + trial, X, A);
    const Instance& inst = named.instance;
    const LinkSpec spec = LinkSpec::mixed_chi2(gammas[gamma_idx++ % 3]);
    const double beta = std::exp(rng.uniform(std::log(0.05), std::log(5.0)));
    const Policy target = testutil::random_positive_policy(rng, X, A);
    Matrix rbar(X, A);
    for (std::size_t x = 0; x < X; ++x)
      for (std::size_t a = 0; a < A; ++a)
        rbar(x, a) = beta * link_value(spec, target(x, a) / inst.pi_ref()(x, a));
    const auto res = solve_regularized(inst, RewardModel(rbar), beta, spec);
    for (std::size_t x = 0; x < X; ++x)
      for (std::size_t a = 0; a < A; ++a)
        CHECK_THAT(res.policy(x, a), Catch::Matchers::WithinAbs(target(x, a), 1e-8));
  }
}

TEST_CASE("solved policy dominates random feasible perturbations") {
  Rng rng(8);
  const auto named = random_instance(61, 2, 4);
  const Instance& inst = named.instance;
  const double beta = 0.2, gamma = 1.0;
  const auto res = solve_regularized(inst, inst.r_star(), beta, LinkSpec::mixed_chi2(gamma));
  for (std::size_t x = 0; x < inst.n_contexts(); ++x) {
    const double star = row_objective(inst, res.policy, inst.r_star(), beta, gamma, x);
    for (int k = 0; k < 1000; ++k) {
      const Policy q = testutil::random_positive_policy(rng, 2, 4);
      CHECK(star + 1e-10 >= row_objective(inst, q, inst.r_star(), beta, gamma, x));
    }
  }
}

TEST_CASE("single-support contexts pass through") {
  Matrix ref(1, 3, 0.0);
  ref(0, 1) = 1.0;
  Matrix r(1, 3, 0.0);
  r(0, 1) = 0.7;
  const Instance inst({1.0}, RewardModel(r), 1.0, Policy(ref));
  const auto res = solve_regularized(inst, inst.r_star(), 0.5, LinkSpec::mixed_chi2(1.0));
  CHECK(res.policy(0, 1) == 1.0);
  // Z = r - beta*phi(1)
  CHECK_THAT(res.z[0], Catch::Matchers::WithinAbs(0.7 - 0.5, 1e-12));
}

TEST_CASE("smoothed chi2 solver fixed points and oracle agreement") {
  const auto named = random_instance(71, 2, 3);
  const Instance& inst = named.instance;

  // constant reward, eta = 0: stationarity gives p proportional to piref
  const auto fixed = solve_smoothed_chi2(inst, RewardModel::constant(2, 3, 0.4), 0.7, 0.0);
  for (std::size_t x = 0; x < 2; ++x)
    for (std::size_t a = 0; a < 3; ++a)
      CHECK_THAT(fixed(x, a), Catch::Matchers::WithinAbs(inst.pi_ref()(x, a), 1e-9));

  // dominant regularizer returns the reference
  const auto heavy = solve_smoothed_chi2(inst, inst.r_star(), 1e6, 0.1);
  for (std::size_t x = 0; x < 2; ++x)
    for (std::size_t a = 0; a < 3; ++a)
      CHECK_THAT(heavy(x, a), Catch::Matchers::WithinAbs(inst.pi_ref()(x, a), 1e-4));

  // objective within 1e-3 of the mesh-1e-3 simplex grid oracle
  Rng rng(9);
  Matrix r(2, 3);
  for (auto& v : r.data()) v = rng.uniform(0.0, 1.0);
  const RewardModel reward(r);
  const auto solved = solve_smoothed_chi2(inst, reward, 0.5, 0.1);
  for (std::size_t x = 0; x < 2; ++x) {
    const double mine = testutil::smoothed_objective(inst, solved, reward, 0.5, 0.1, x);
    const double grid = testutil::grid_best_smoothed_objective(inst.pi_ref().row(x),
                                                               reward.row(x), 0.5, 0.1);
    CHECK(mine >= grid - 1e-3);
    CHECK(mine <= grid + 1e-3);
  }
}

TEST_CASE("smoothed chi2 KKT residual") {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const auto named = random_instance(7100 + trial, 1, 3);
    const Instance& inst = named.instance;
    Matrix r(1, 3);
    for (auto& v : r.data()) v = rng.uniform(0.0, 1.0);
    const double beta = 0.5, eta = 0.1;
    const auto pol = solve_smoothed_chi2(inst, RewardModel(r), beta, eta);
    // recover lambda from a supported action, then check stationarity on all
    double lambda = 0.0;
    bool have = false;
    for (std::size_t a = 0; a < 3; ++a) {
      if (pol(0, a) <= 0.0) continue;
      const double c = inst.pi_ref()(0, a), p = pol(0, a);
      const double g = p * (2.0 * c + eta * p) / ((c + eta * p) * (c + eta * p));
      if (!have) {
        lambda = r(0, a) - beta * g;
        have = true;
      } else {
        CHECK_THAT(r(0, a) - beta * g, Catch::Matchers::WithinAbs(lambda, 1e-8));
      }
    }
    for (std::size_t a = 0; a < 3; ++a)
      if (pol(0, a) == 0.0) CHECK(r(0, a) <= lambda + 1e-8);
  }
}

TEST_CASE("mirror step fixed point and limit behavior") {
  const auto named = random_instance(81, 2, 3);
  const Instance& inst = named.instance;

  const auto fixed =
      mirror_step(inst, inst.pi_ref(), RewardModel::constant(2, 3, 0.0), 0.2, 0.5);
  for (std::size_t x = 0; x < 2; ++x)
    for (std::size_t a = 0; a < 3; ++a)
      CHECK_THAT(fixed.policy(x, a), Catch::Matchers::WithinAbs(inst.pi_ref()(x, a), 1e-10));

  // enormous eta kills the Bregman term: one step equals the plain solve
  Rng rng(11);
  Matrix r(2, 3);
  for (auto& v : r.data()) v = rng.uniform(-1.0, 1.0);
  const RewardModel reward(r);
  const Policy pi_t = testutil::random_positive_policy(rng, 2, 3);
  const auto stepped = mirror_step(inst, pi_t, reward, 0.3, 1e9);
  const auto direct = solve_regularized(inst, reward, 0.3, LinkSpec::mixed_chi2(1.0));
  for (std::size_t x = 0; x < 2; ++x)
    for (std::size_t a = 0; a < 3; ++a)
      CHECK_THAT(stepped.policy(x, a), Catch::Matchers::WithinAbs(direct.policy(x, a), 1e-5));
}

TEST_CASE("mirror step satisfies the predictor stationarity identity") {
  // f(x,a,b) - (r(x,a) - r(x,b)) = 0 for all action pairs
  Rng rng(12);
  const LinkSpec chi = LinkSpec::mixed_chi2(1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto named = random_instance(8200 + trial, 2, 3);
    const Instance& inst = named.instance;
    Matrix r(2, 3);
    for (auto& v : r.data()) v = rng.uniform(-1.0, 1.0);
    const RewardModel reward(r);
    const Policy pi_t = testutil::random_positive_policy(rng, 2, 3);
    const double beta = 0.25, eta = 0.6;
    const auto next = mirror_step(inst, pi_t, reward, beta, eta);
    for (std::size_t x = 0; x < 2; ++x)
      for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b) {
          const auto phi = [&](const Policy& p, std::size_t act) {
            return link_value(chi, p(x, act) / inst.pi_ref()(x, act));
          };
          const double f = (1.0 + 1.0 / eta) * beta * (phi(next.policy, a) - phi(next.policy, b)) -
                           (1.0 / eta) * beta * (phi(pi_t, a) - phi(pi_t, b));
          CHECK_THAT(f, Catch::Matchers::WithinAbs(r(x, a) - r(x, b), 1e-8));
        }
  }
}

TEST_CASE("solver input validation") {
  const auto named = random_instance(91, 2, 3);
  CHECK_THROWS_AS(
      solve_regularized(named.instance, named.instance.r_star(), 0.0, LinkSpec::mixed_chi2(1.0)),
      DomainError);
  CHECK_THROWS_AS(solve_smoothed_chi2(named.instance, named.instance.r_star(), 0.5, -0.1),
                  DomainError);
  CHECK_THROWS_AS(
      mirror_step(named.instance, named.instance.pi_ref(), named.instance.r_star(), 0.5, 0.0),
      DomainError);
  CHECK_THROWS_AS(solve_regularized(named.instance, RewardModel::constant(1, 3, 0.0), 0.5,
                                    LinkSpec::mixed_chi2(1.0)),
                  DimensionError);
}
