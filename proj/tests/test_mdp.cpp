#include <doctest.h>

#include <random>

#include "ssp/errors.hpp"
#include "ssp/mdp.hpp"
#include "ssp/random_mdp.hpp"
#include "support/fixtures.hpp"
#include "support/mutations.hpp"

using namespace ssp;
using namespace ssp::testing;

TEST_CASE("chain2 validates cleanly") { CHECK(validate(chain2()).ok()); }

TEST_CASE("row sum violation names the state-action pair") {
  auto mdp = SspMdpBuilder(2, 1).add(0, 0, 1, 0.8, 1.0).add_absorbing_goal(1).build();
  const auto report = validate(mdp);
  REQUIRE(report.violations.size() == 1);
  const auto& v = report.violations.front();
  CHECK(v.kind == ViolationKind::kRowSum);
  CHECK(v.state == 0u);
  CHECK(v.action == 0u);
  CHECK(v.message.find("row sum 0.8") != std::string::npos);
  CHECK(v.message.find("(0,0)") != std::string::npos);
}

TEST_CASE("goal with nonzero cost is reported") {
  auto mdp = SspMdpBuilder(2, 1).add(0, 0, 1, 1.0, 1.0).mark_goal(1).add(1, 0, 1, 1.0, 0.5).build();
  const auto report = validate(mdp);
  REQUIRE(report.has(ViolationKind::kGoalCost));
  CHECK(report.violations.front().message.find("goal 1 has nonzero cost") != std::string::npos);
}

TEST_CASE("validation flags each kind of fault") {
  SUBCASE("probability out of range") {
    auto m = SspMdpBuilder(2, 1).add(0, 0, 1, 1.5, 1.0).add(0, 0, 0, -0.5, 1.0).add_absorbing_goal(1).build();
    CHECK(validate(m).has(ViolationKind::kProbabilityRange));
  }
  SUBCASE("negative cost") {
    auto m = SspMdpBuilder(2, 1).add(0, 0, 1, 1.0, -1.0).add_absorbing_goal(1).build();
    CHECK(validate(m).has(ViolationKind::kCostRange));
  }
  SUBCASE("zero non-goal cost") {
    auto m = SspMdpBuilder(2, 1).add(0, 0, 1, 1.0, 0.0).add_absorbing_goal(1).build();
    CHECK(validate(m).has(ViolationKind::kNonPositiveCost));
  }
  SUBCASE("goal leaks") {
    auto m = SspMdpBuilder(2, 1).add(0, 0, 1, 1.0, 1.0).mark_goal(1).add(1, 0, 0, 1.0, 0.0).build();
    CHECK(validate(m).has(ViolationKind::kGoalNotAbsorbing));
  }
  SUBCASE("no goal") {
    auto m = SspMdpBuilder(1, 1).add(0, 0, 0, 1.0, 1.0).build();
    CHECK(validate(m).has(ViolationKind::kNoGoal));
  }
  SUBCASE("goal unreachable") {
    auto m = SspMdpBuilder(3, 1)
                 .add(0, 0, 1, 1.0, 1.0)
                 .add(2, 0, 2, 1.0, 1.0)
                 .add_absorbing_goal(1)
                 .build();
    const auto r = validate(m);
    REQUIRE(r.has(ViolationKind::kGoalUnreachable));
    CHECK(r.violations.back().state == 2u);
  }
}

TEST_CASE("expected cost") {
  CHECK(expected_cost(chain2(), 0, 0) == 1.0);
  CHECK(expected_cost(chain2(), 1, 0) == 0.0);
  CHECK(expected_cost(slip_chain(), 0, 0) == 1.0);
  CHECK_THROWS_AS(expected_cost(chain2(), 2, 0), UsageError);
  CHECK_THROWS_AS(expected_cost(chain2(), 0, 1), UsageError);
}

TEST_CASE("expected cost on slip chain matches enumeration over successors") {
  const auto mdp = slip_chain();
  double brute = 0.0;
  for (StateId next = 0; next < mdp.num_states(); ++next) {
    for (const auto& t : mdp.outcomes(0, 0)) {
      if (t.next == next) brute += t.prob * t.cost;
    }
  }
  CHECK(expected_cost(mdp, 0, 0) == doctest::Approx(brute).epsilon(1e-15));
  CHECK(brute == 1.0);
}

TEST_CASE("expected cost scales linearly with costs") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto mdp = random_mdp({}, rng);
    const double k = 0.25 + 4.0 * std::uniform_real_distribution<double>(0, 1)(rng);
    const auto scaled = mdp.with_scaled_costs(k);
    for (StateId s = 0; s < mdp.num_states(); ++s) {
      for (ActionId a = 0; a < mdp.num_actions(); ++a) {
        CHECK(expected_cost(scaled, s, a) == doctest::Approx(k * expected_cost(mdp, s, a)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("as_stochastic gives point masses that round-trip") {
  DeterministicPolicy p(std::vector<ActionId>{1});
  const auto sp = as_stochastic(p, 2);
  CHECK(sp.prob(0, 0) == 0.0);
  CHECK(sp.prob(0, 1) == 1.0);
  CHECK(sp.is_normalized());
  CHECK(greedy_extract(sp) == p);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 10;
    const std::size_t m = 1 + rng() % 5;
    DeterministicPolicy q(n, 0);
    for (StateId s = 0; s < n; ++s) q[s] = rng() % m;
    const auto sq = as_stochastic(q, m);
    CHECK(sq.is_normalized());
    CHECK(greedy_extract(sq) == q);
  }
}

TEST_CASE("greedy action uses the lowest index among ties") {
  const double tied[] = {2.0, 2.0};
  const double goal[] = {0.0, 0.0};
  const double row[] = {3.0, 2.0};
  CHECK(greedy_action(tied) == 0);
  CHECK(greedy_action(goal) == 0);
  CHECK(greedy_action(row) == 1);
}

TEST_CASE("backward greedy policy is proper on random MDPs") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto mdp = random_mdp({}, rng);
    REQUIRE(validate(mdp).ok());
    CHECK(is_proper(mdp, backward_greedy_policy(mdp)));
    CHECK(is_proper(mdp, random_proper_policy(mdp, rng)));
  }
}

TEST_CASE("is_proper detects a policy that never leaves a loop") {
  auto mdp = SspMdpBuilder(2, 2)
                 .add(0, 0, 0, 1.0, 1.0)
                 .add(0, 1, 1, 1.0, 1.0)
                 .add_absorbing_goal(1)
                 .build();
  CHECK_FALSE(is_proper(mdp, DeterministicPolicy(std::vector<ActionId>{0, 0})));
  CHECK(is_proper(mdp, DeterministicPolicy(std::vector<ActionId>{1, 0})));
}

TEST_CASE("builder rejects duplicates and bad indices") {
  SspMdpBuilder b(2, 1);
  b.add(0, 0, 1, 1.0, 1.0);
  CHECK_THROWS_AS(b.add(0, 0, 1, 1.0, 1.0), UsageError);
  CHECK_THROWS_AS(b.add(0, 1, 1, 1.0, 1.0), UsageError);
  CHECK_THROWS_AS(b.add(2, 0, 1, 1.0, 1.0), UsageError);
}


TEST_CASE("every injected single fault is reported") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const auto mdp = random_mdp({}, rng);
    REQUIRE(validate(mdp).ok());
    for (const auto& m : single_fault_mutations(mdp, rng)) {
      INFO(m.name);
      CHECK(validate(m.mutated).has(m.expected));
    }
  }
}
