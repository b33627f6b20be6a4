#include <catch_amalgamated.hpp>

#include <cmath>

#include "offalign/divergences.hpp"
#include "offalign/instances.hpp"
#include "offalign/solvers.hpp"
#include "testutil.hpp"

using namespace offalign;

TEST_CASE("illustrative construction matches the formulas") {
  const auto named = illustrative(10);
  const Instance& inst = named.instance;
  CHECK(inst.n_contexts() == 1);
  CHECK(inst.n_actions() == 4);
  CHECK(inst.pi_ref()(0, 0) == 0.5);
  CHECK(inst.pi_ref()(0, 1) == 0.05);
  CHECK(inst.pi_ref()(0, 2) == 0.05);
  CHECK_THAT(inst.pi_ref()(0, 3), Catch::Matchers::WithinAbs(0.4, 1e-15));
  CHECK(inst.r_max() == 1.0);
  REQUIRE(named.reward_class.size() == 2);
  CHECK(named.reward_class[0] == inst.r_star());
  CHECK(named.reward_class[0](0, 1) == 1.0);
  CHECK(named.reward_class[1](0, 2) == 1.0);

  // coverage of the sample-starved action a1 is 2n
  CHECK_THAT(coverage(inst, Policy::point_mass(1, 4, 1)).c_one,
             Catch::Matchers::WithinAbs(20.0, 1e-12));

  // 0 <= r <= 1 entrywise for both class members
  for (const auto& r : named.reward_class)
    for (double v : r.values().data()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
}

TEST_CASE("illustrative n = 2 zeroes out a3 but stays representable") {
  const auto named = illustrative(2);
  CHECK(named.instance.pi_ref()(0, 3) == 0.0);
  CHECK(named.instance.pi_ref()(0, 1) == 0.25);
  CHECK_THROWS_AS(illustrative(1), DomainError);
}

TEST_CASE("rpo_lower construction matches the proof") {
  const std::size_t n = 10;
  const auto named = rpo_lower(n);
  const Instance& inst = named.instance;
  const double zeta = rpo_lower_default_zeta(n);
  CHECK_THAT(zeta, Catch::Matchers::WithinAbs(std::log(2.0) / (2.0 * std::log(10.0)), 1e-15));

  // piref identical in both contexts
  for (std::size_t x = 0; x < 2; ++x) {
    CHECK(inst.pi_ref()(x, 0) == 0.5);
    CHECK(inst.pi_ref()(x, 1) == 0.05);
    CHECK(inst.pi_ref()(x, 2) == 0.05);
  }
  // J(comparator on a0) = zeta/2 + 1/4
  const Policy comparator = Policy::point_mass(2, 4, 0);
  CHECK_THAT(expected_return(inst, comparator, inst.r_star()),
             Catch::Matchers::WithinAbs(zeta / 2.0 + 0.25, 1e-15));

  for (const auto& r : named.reward_class)
    for (double v : r.values().data()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  CHECK_THROWS_AS(rpo_lower(10, 1.5), DomainError);
}

TEST_CASE("rpo_lower small-beta regime loses at least 1/16") {
  // with the wrong tied model selected and beta = 1/(2 log n), the
  // KL-induced policy's regret against the a0 comparator is >= 1/16
  for (std::size_t n : {10, 100, 1000}) {
    const auto named = rpo_lower(n);
    const Instance& inst = named.instance;
    const double beta = 1.0 / (2.0 * std::log(static_cast<double>(n)));
    const Policy induced =
        solve_regularized(inst, named.reward_class[1], beta, LinkSpec::kl()).policy;
    const double loss = regret(inst, Policy::point_mass(2, 4, 0), induced);
    CHECK(loss >= 1.0 / 16.0);
  }
}

TEST_CASE("general_lower tables and minimax structure") {
  const auto [one, two] = general_lower(2.0);
  const auto& l1 = *one.pref;
  const auto& l2 = *two.pref;

  // printed tables: indices a=0, b=1, c=2, d=3
  CHECK(l1(0, 2, 3) == 1.0);
  CHECK(l2(0, 2, 3) == -1.0);
  CHECK(l1(0, 0, 3) == 0.0);
  CHECK(l2(0, 0, 3) == -1.0);
  CHECK(l1(0, 1, 3) == -1.0);
  CHECK(l2(0, 1, 3) == 0.0);
  // both vanish on {a,b,c} x {a,b,c}
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) {
      CHECK(l1(0, a, b) == 0.0);
      CHECK(l2(0, a, b) == 0.0);
    }
  // shared reference: mass 1/C on a and b, zero on d
  CHECK(one.instance.pi_ref()(0, 0) == 0.5);
  CHECK(one.instance.pi_ref()(0, 3) == 0.0);
  CHECK(one.instance.pi_ref() == two.instance.pi_ref());

  // minimax winners: a for instance one, b for instance two
  CHECK(duality_gap(one.instance.rho(), l1, Policy::point_mass(1, 4, 0)) == 0.0);
  CHECK(duality_gap(two.instance.rho(), l2, Policy::point_mass(1, 4, 1)) == 0.0);

  CHECK_THROWS_AS(general_lower(1.5), DomainError);

  // C > 2 keeps c's mass positive
  const auto [three, four] = general_lower(4.0);
  CHECK(three.instance.pi_ref()(0, 2) == 0.5);
}

TEST_CASE("bad_event_holds") {
  PreferenceDataset empty;
  CHECK(bad_event_holds(empty, {1, 2}));
  PreferenceDataset with;
  with.tuples.push_back({0, 0, 3});
  CHECK(bad_event_holds(with, {1, 2}));
  with.tuples.push_back({0, 1, 3});
  CHECK_FALSE(bad_event_holds(with, {1, 2}));
  PreferenceDataset minus_side;
  minus_side.tuples.push_back({0, 0, 2});
  CHECK_FALSE(bad_event_holds(minus_side, {1, 2}));
}

TEST_CASE("random_instance determinism and degenerate shapes") {
  const auto a = random_instance(99, 3, 5, 2.0);
  const auto b = random_instance(99, 3, 5, 2.0);
  CHECK(a.instance == b.instance);
  const auto c = random_instance(100, 3, 5, 2.0);
  CHECK_FALSE(a.instance == c.instance);

  const auto solo = random_instance(7, 2, 1);
  CHECK(solo.instance.pi_ref()(0, 0) == 1.0);
  CHECK(solo.instance.pi_ref()(1, 0) == 1.0);

  // strictly positive reference and rho, rewards within range
  for (double v : a.instance.pi_ref().probs().data()) CHECK(v > 0.0);
  for (double v : a.instance.rho()) CHECK(v > 0.0);
  for (double v : a.instance.r_star().values().data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 2.0);
  }
  CHECK_THROWS_AS(random_instance(1, 0, 3), DomainError);
}
