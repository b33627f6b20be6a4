#include <catch_amalgamated.hpp>

#include "offalign/core.hpp"
#include "offalign/instances.hpp"
#include "offalign/rng.hpp"
#include "testutil.hpp"

using namespace offalign;

TEST_CASE("expected_return constant reward equals the constant") {
  const auto named = random_instance(11, 3, 5);
  const Policy uniform = Policy::uniform(3, 5);
  const RewardModel c = RewardModel::constant(3, 5, 0.37);
  CHECK_THAT(expected_return(named.instance, uniform, c),
             Catch::Matchers::WithinAbs(0.37, 1e-14));
}

TEST_CASE("expected_return point mass on argmax attains the max") {
  const auto named = random_instance(5, 4, 6);
  const Instance& inst = named.instance;
  Matrix probs(4, 6, 0.0);
  double best = 0.0;
  for (std::size_t x = 0; x < 4; ++x) {
    std::size_t arg = 0;
    for (std::size_t a = 1; a < 6; ++a)
      if (inst.r_star()(x, a) > inst.r_star()(x, arg)) arg = a;
    probs(x, arg) = 1.0;
    best += inst.rho()[x] * inst.r_star()(x, arg);
  }
  const Policy greedy(std::move(probs));
  CHECK_THAT(expected_return(inst, greedy, inst.r_star()),
             Catch::Matchers::WithinAbs(best, 1e-14));
  // no policy beats the per-context argmax
  Rng rng(4);
  for (int k = 0; k < 50; ++k) {
    const Policy q = testutil::random_positive_policy(rng, 4, 6);
    CHECK(expected_return(inst, q, inst.r_star()) <= best + 1e-12);
  }
}

TEST_CASE("expected_return on the illustrative instance matches the oracle") {
  const auto named = illustrative(10);
  const Instance& inst = named.instance;
  const double j = expected_return(inst, inst.pi_ref(), inst.r_star());
  CHECK_THAT(j, Catch::Matchers::WithinAbs(
                    testutil::return_oracle(inst, inst.pi_ref(), inst.r_star()), 1e-15));
  // piref = (.5,.05,.05,.4), r1 = (.5,1,0,0): J = .25 + .05
  CHECK_THAT(j, Catch::Matchers::WithinAbs(0.30, 1e-15));
}

TEST_CASE("expected_return is linear in reward and policy") {
  Rng rng(21);
  const auto named = random_instance(31, 3, 4);
  const Instance& inst = named.instance;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix r1m(3, 4), r2m(3, 4);
    for (auto& v : r1m.data()) v = rng.uniform(0.0, 1.0);
    for (auto& v : r2m.data()) v = rng.uniform(0.0, 1.0);
    const double s = rng.uniform(-2.0, 2.0), t = rng.uniform(-2.0, 2.0);
    Matrix mix(3, 4);
    for (std::size_t i = 0; i < mix.data().size(); ++i)
      mix.data()[i] = s * r1m.data()[i] + t * r2m.data()[i];
    const Policy pi = testutil::random_positive_policy(rng, 3, 4);
    const double lhs = expected_return(inst, pi, RewardModel(mix));
    const double rhs = s * expected_return(inst, pi, RewardModel(r1m)) +
                       t * expected_return(inst, pi, RewardModel(r2m));
    CHECK_THAT(lhs, Catch::Matchers::WithinAbs(rhs, 1e-12));

    // mixture of policies
    const Policy pa = testutil::random_positive_policy(rng, 3, 4);
    const Policy pb = testutil::random_positive_policy(rng, 3, 4);
    const double w = rng.uniform();
    Matrix pm(3, 4);
    for (std::size_t i = 0; i < pm.data().size(); ++i)
      pm.data()[i] = w * pa.probs().data()[i] + (1.0 - w) * pb.probs().data()[i];
    const RewardModel r1(r1m);
    CHECK_THAT(expected_return(inst, Policy(pm), r1),
               Catch::Matchers::WithinAbs(w * expected_return(inst, pa, r1) +
                                              (1.0 - w) * expected_return(inst, pb, r1),
                                          1e-12));
  }
}

TEST_CASE("regret conventions") {
  const auto named = illustrative(10);
  const Instance& inst = named.instance;
  Rng rng(77);
  for (int k = 0; k < 10; ++k) {
    const Policy pi = testutil::random_positive_policy(rng, 1, 4);
    CHECK(regret(inst, pi, pi) == 0.0);
  }
  // greedy comparator vs uniform candidate, by enumeration: greedy picks a1
  // (r=1), uniform averages (0.5+1+0+0)/4
  const Policy greedy = Policy::point_mass(1, 4, 1);
  const Policy uniform = Policy::uniform(1, 4);
  CHECK_THAT(regret(inst, greedy, uniform), Catch::Matchers::WithinAbs(1.0 - 0.375, 1e-15));
  // candidate better than comparator: negative regret permitted
  CHECK(regret(inst, uniform, greedy) < 0.0);
}

TEST_CASE("shape and invariant errors") {
  const auto named = illustrative(10);
  const Instance& inst = named.instance;
  const Policy wrong = Policy::uniform(1, 3);
  CHECK_THROWS_AS(expected_return(inst, wrong, inst.r_star()), DimensionError);
  CHECK_THROWS_AS(regret(inst, wrong, inst.pi_ref()), DimensionError);

  Matrix bad(1, 2);
  bad(0, 0) = 0.6;
  bad(0, 1) = 0.5;
  CHECK_THROWS_AS(Policy(bad), DomainError);

  Matrix neg(1, 2);
  neg(0, 0) = -0.1;
  neg(0, 1) = 1.1;
  CHECK_THROWS_AS(Policy(neg), DomainError);

  // rho must be strictly positive and normalized
  CHECK_THROWS_AS(Instance({0.0, 1.0}, RewardModel::constant(2, 2, 0.5), 1.0,
                           Policy::uniform(2, 2)),
                  DomainError);
  CHECK_THROWS_AS(Instance({0.5, 0.5}, RewardModel::constant(2, 2, 2.5), 1.0,
                           Policy::uniform(2, 2)),
                  DomainError);
}

TEST_CASE("preference dataset validation") {
  const auto named = illustrative(10);
  PreferenceDataset data;
  data.tuples.push_back({0, 1, 2});
  CHECK_NOTHROW(data.validate_against(named.instance));
  data.tuples.push_back({0, 4, 2});
  CHECK_THROWS_AS(data.validate_against(named.instance), DimensionError);
}
