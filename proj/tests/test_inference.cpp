#include <doctest.h>

#include <cmath>
#include <random>

#include "ssp/dp_solver.hpp"
#include "ssp/errors.hpp"
#include "ssp/grid.hpp"
#include "ssp/inference.hpp"
#include "ssp/random_mdp.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace ssp;
using namespace ssp::testing;

namespace {

DeterministicPolicy point(std::initializer_list<ActionId> a) {
  return DeterministicPolicy(std::vector<ActionId>(a));
}

StochasticPolicy stoch(const SspMdp& mdp, const DeterministicPolicy& p) {
  return as_stochastic(p, mdp.num_actions());
}

// γ-discounted truncated state-action values, straight from the table:
// Q_k(s,a) = C̄(s,a) + γ Σ_j p(j|s,a) V_{k-1}(j), V_k = Q_k(·, π).
QFunction discounted_truncated_q(const SspMdp& mdp, const DeterministicPolicy& pi, double gamma,
                                 std::size_t lookahead) {
  std::vector<double> v(mdp.num_states(), 0.0);
  for (std::size_t k = 0; k < lookahead; ++k) {
    std::vector<double> next(v.size(), 0.0);
    for (StateId s = 0; s < mdp.num_states(); ++s) {
      if (mdp.is_goal(s)) continue;
      for (const auto& t : mdp.outcomes(s, pi[s])) next[s] += t.prob * (t.cost + gamma * v[t.next]);
    }
    v = next;
  }
  QFunction q(mdp.num_states(), mdp.num_actions());
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (mdp.is_goal(s)) continue;
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      for (const auto& t : mdp.outcomes(s, a)) q(s, a) += t.prob * (t.cost + gamma * v[t.next]);
    }
  }
  return q;
}

}  // namespace

TEST_CASE("scale_costs on hand examples") {
  const auto two = scale_costs(two_action());
  CHECK(two.min_cost == 0.0);
  CHECK(two.max_cost == 3.0);
  CHECK(two(0, 0) == 1.0);
  CHECK(two(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(two(1, 0) == 0.0);
  CHECK(two(1, 1) == 0.0);

  const auto chain = scale_costs(chain2());
  CHECK(chain(0, 0) == 1.0);
  CHECK(chain(1, 0) == 0.0);
}

TEST_CASE("scale_costs rejects all-zero costs") {
  auto mdp = SspMdpBuilder(1, 1).add_absorbing_goal(0).build();
  CHECK_THROWS_AS(scale_costs(mdp), DegenerateMdpError);
}

TEST_CASE("property: scaled costs reconstruct expected costs and ignore cost units") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    const auto mdp = random_mdp({}, rng);
    const auto sc = scale_costs(mdp);
    CHECK(sc.min_cost == 0.0);
    const double k = std::uniform_real_distribution<double>(0.1, 10.0)(rng);
    const auto sk = scale_costs(mdp.with_scaled_costs(k));
    for (StateId s = 0; s < mdp.num_states(); ++s) {
      for (ActionId a = 0; a < mdp.num_actions(); ++a) {
        CHECK(sc(s, a) >= 0.0);
        CHECK(sc(s, a) <= 1.0);
        CHECK(std::abs(sc(s, a) * (sc.max_cost - sc.min_cost) + sc.min_cost - expected_cost(mdp, s, a)) < 1e-9);
        CHECK(std::abs(sk(s, a) - sc(s, a)) < 1e-12);
      }
    }
  }
}

TEST_CASE("time priors") {
  const auto flat = TimePrior::flat(3);
  CHECK(flat.t_max() == 3);
  for (double w : flat.weights()) CHECK(w == 0.25);

  const auto disc = TimePrior::discounted(0.5, 3);
  double sum = 0.0;
  for (double w : disc.weights()) sum += w;
  CHECK(std::abs(sum - 1.0) < 1e-12);
  for (std::size_t t = 1; t <= 3; ++t) CHECK(disc.weight(t) == doctest::Approx(0.5 * disc.weight(t - 1)));
  CHECK_THROWS_AS(TimePrior::discounted(1.0, 3), UsageError);
  CHECK_THROWS_AS(TimePrior::discounted(0.0, 3), UsageError);
}

TEST_CASE("e_step messages on chain2") {
  const auto mdp = chain2();
  const auto e = e_step(mdp, scale_costs(mdp), stoch(mdp, point({0, 0})), TimePrior::flat(2));
  CHECK(e.betas(0, 0) == 1.0);
  CHECK(e.betas(0, 1) == 0.0);
  CHECK(e.betas(1, 0) == 0.0);
  CHECK(e.betas(1, 1) == 0.0);
  CHECK(e.betas(2, 0) == 0.0);
  CHECK(e.betas(2, 1) == 0.0);
}

TEST_CASE("e_step messages on the slip chain match path enumeration") {
  const auto mdp = slip_chain();
  const auto sc = scale_costs(mdp);
  const auto pi = point({0, 0});
  const auto e = e_step(mdp, sc, stoch(mdp, pi), TimePrior::flat(3));
  const double expected[] = {1.0, 0.5, 0.25, 0.125};
  for (std::size_t tau = 0; tau <= 3; ++tau) {
    CHECK(e.betas(tau, 0) == expected[tau]);
    CHECK(e.betas(tau, 0) == enumerate_event_probability(mdp, pi, 0, tau, sc));
    CHECK(e.betas(tau, 1) == 0.0);
  }
}

TEST_CASE("m_step_greedy") {
  QFunction q(2, 2);
  q(0, 0) = 1.0;
  q(0, 1) = 1.0 / 3.0;
  const auto p = m_step_greedy(q);
  CHECK(p[0] == 1);
  CHECK(p[1] == 0);
}

TEST_CASE("value_from_betas equals truncated evaluation on hand examples") {
  {
    const auto mdp = chain2();
    const auto prior = TimePrior::flat(2);
    const auto sc = scale_costs(mdp);
    const auto v = value_from_betas(e_step(mdp, sc, stoch(mdp, point({0, 0})), prior).betas, sc, prior);
    CHECK(v[0] == 1.0);
    CHECK(policy_evaluation(mdp, point({0, 0}), Truncated{3})[0] == 1.0);
  }
  {
    const auto mdp = slip_chain();
    const auto prior = TimePrior::flat(3);
    const auto sc = scale_costs(mdp);
    const auto v = value_from_betas(e_step(mdp, sc, stoch(mdp, point({0, 0})), prior).betas, sc, prior);
    CHECK(v[0] == 1.875);
    CHECK(policy_evaluation(mdp, point({0, 0}), Truncated{4})[0] == 1.875);
  }
  {
    // All-goal model: no messages, zero values. Costs are degenerate, so the
    // scaled model is assembled by hand.
    BetaMessages betas(4, 3);
    ScaledCostModel sc{3, 1, {0.0, 0.0, 0.0}, 1.0, 0.0};
    const auto v = value_from_betas(betas, sc, TimePrior::flat(4));
    for (StateId s = 0; s < 3; ++s) CHECK(v[s] == 0.0);
  }
}

TEST_CASE("em_solve on hand examples") {
  const auto two = em_solve(two_action(), TimePrior::flat(50));
  CHECK(two.converged);
  CHECK(two.policy[0] == 1);
  const auto pi = policy_iteration(two_action(), std::nullopt, EpsilonGreedy{1e-10});
  CHECK(two.policy == pi.policy);

  const auto chain = em_solve(chain2(), TimePrior::flat(1));
  CHECK(chain.policy[0] == 0);
  CHECK(chain.values[0] == 1.0);
}

TEST_CASE("em_solve on the deterministic grid matches truncated policy iteration") {
  const auto mdp = grid_to_mdp(grid4x4(0.0));
  const auto em = em_solve(mdp, TimePrior::flat(32));
  const auto tpi = policy_iteration(mdp, std::nullopt, Truncated{32});
  REQUIRE(em.converged);
  REQUIRE(tpi.converged);
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (!mdp.is_goal(s)) CHECK(em.policy[s] == tpi.policy[s]);
  }
  CHECK(em.values[*mdp.start()] == 6.0);
}

TEST_CASE("property: value_from_betas equals truncated evaluation (flat prior)") {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 60; ++trial) {
    const auto mdp = random_mdp({}, rng);
    const auto sc = scale_costs(mdp);
    const auto pi = random_proper_policy(mdp, rng);
    for (std::size_t t_max : {1u, 4u, 16u, 64u}) {
      const auto prior = TimePrior::flat(t_max);
      const auto e = e_step(mdp, sc, stoch(mdp, pi), prior);
      const auto v_em = value_from_betas(e.betas, sc, prior);
      const auto v_pe = policy_evaluation(mdp, pi, Truncated{t_max + 1});
      for (StateId s = 0; s < mdp.num_states(); ++s) CHECK(std::abs(v_em[s] - v_pe[s]) <= 1e-9);
    }
  }
}

TEST_CASE("property: messages are probabilities and vanish at goals") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 100; ++trial) {
    const auto mdp = random_mdp({}, rng);
    const auto sc = scale_costs(mdp);
    const auto prior = (trial % 2) ? TimePrior::flat(30) : TimePrior::discounted(0.9, 30);
    const auto e = e_step(mdp, sc, stoch(mdp, random_proper_policy(mdp, rng)), prior);
    for (std::size_t tau = 0; tau <= 30; ++tau) {
      for (StateId s = 0; s < mdp.num_states(); ++s) {
        CHECK(e.betas(tau, s) >= 0.0);
        CHECK(e.betas(tau, s) <= 1.0);
        if (mdp.is_goal(s)) CHECK(e.betas(tau, s) == 0.0);
      }
    }
    for (StateId s = 0; s < mdp.num_states(); ++s) {
      for (ActionId a = 0; a < mdp.num_actions(); ++a) {
        CHECK(e.q_prob(s, a) >= 0.0);
        CHECK(e.q_prob(s, a) <= 1.0);
      }
    }
  }
}

TEST_CASE("property: greedy M-step equals policy improvement on the truncated value") {
  // Σ_{τ≤T} q_τ · max_cost = C̄ + P·V_T where V_T is T-sweep truncated
  // evaluation, so the argmins coincide exactly under the shared tie rule.
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 100; ++trial) {
    const auto mdp = random_mdp({}, rng);
    const auto sc = scale_costs(mdp);
    const auto pi = random_proper_policy(mdp, rng);
    const std::size_t t_max = 1 + rng() % 40;
    const auto e = e_step(mdp, sc, stoch(mdp, pi), TimePrior::flat(t_max));
    const auto improved = policy_improvement(compute_q(mdp, policy_evaluation(mdp, pi, Truncated{t_max})));
    CHECK(m_step_greedy(e.q_prob) == improved);

    // Q_prob is the flat mixture of the same quantity.
    const auto q = compute_q(mdp, policy_evaluation(mdp, pi, Truncated{t_max}));
    for (StateId s = 0; s < mdp.num_states(); ++s) {
      for (ActionId a = 0; a < mdp.num_actions(); ++a) {
        CHECK(std::abs(e.q_prob(s, a) * static_cast<double>(t_max + 1) * sc.max_cost - q(s, a)) <=
              1e-9 * std::max(1.0, q(s, a)));
      }
    }
  }
}

TEST_CASE("property: EM and truncated policy iteration agree round by round") {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 60; ++trial) {
    const auto mdp = random_mdp({}, rng);
    const std::size_t k = 1 + rng() % 30;
    const auto prior = TimePrior::flat(k);
    const auto sc = scale_costs(mdp);
    DeterministicPolicy em_pi = random_proper_policy(mdp, rng);
    DeterministicPolicy dp_pi = em_pi;
    for (int round = 0; round < 20; ++round) {
      em_pi = m_step_greedy(e_step(mdp, sc, stoch(mdp, em_pi), prior).q_prob);
      dp_pi = policy_improvement(compute_q(mdp, policy_evaluation(mdp, dp_pi, Truncated{k})));
      REQUIRE(em_pi == dp_pi);
    }
    // Truncated improvement is not monotone and may oscillate; both solvers
    // must then detect the same cycle.
    const auto tpi = policy_iteration(mdp, std::nullopt, Truncated{k});
    if (tpi.converged) {
      const auto em = em_solve(mdp, prior);
      CHECK(em.policy == tpi.policy);
      CHECK(em.improvement_rounds == tpi.improvement_rounds);
    } else {
      CHECK_THROWS_AS(em_solve(mdp, prior), PolicyCycleError);
    }
  }
}

TEST_CASE("property: rescaling prior weights leaves the M-step unchanged") {
  std::mt19937_64 rng(67);
  for (int trial = 0; trial < 100; ++trial) {
    const auto mdp = random_mdp({}, rng);
    const auto e = e_step(mdp, scale_costs(mdp), stoch(mdp, random_proper_policy(mdp, rng)),
                          TimePrior::flat(20));
    const double c = std::uniform_real_distribution<double>(0.01, 100.0)(rng);
    QFunction scaled(e.q_prob.num_states(), e.q_prob.num_actions());
    for (StateId s = 0; s < mdp.num_states(); ++s) {
      for (ActionId a = 0; a < mdp.num_actions(); ++a) scaled(s, a) = c * e.q_prob(s, a);
    }
    CHECK(m_step_greedy(scaled) == m_step_greedy(e.q_prob));
  }
}

TEST_CASE("property: discounted prior M-step matches discounted truncated improvement") {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 100; ++trial) {
    const auto mdp = random_mdp({}, rng);
    const double gamma = std::uniform_real_distribution<double>(0.5, 0.99)(rng);
    const std::size_t t_max = 1 + rng() % 40;
    const auto pi = random_proper_policy(mdp, rng);
    const auto e = e_step(mdp, scale_costs(mdp), stoch(mdp, pi), TimePrior::discounted(gamma, t_max));
    CHECK(m_step_greedy(e.q_prob) == greedy_policy(discounted_truncated_q(mdp, pi, gamma, t_max)));
  }
}

TEST_CASE("discounted value_from_betas approaches the discounted value for long horizons") {
  std::mt19937_64 rng(73);
  for (int trial = 0; trial < 20; ++trial) {
    const auto mdp = random_mdp({}, rng);
    const auto sc = scale_costs(mdp);
    const auto pi = random_proper_policy(mdp, rng);
    const double gamma = 0.9;
    const auto prior = TimePrior::discounted(gamma, 400);
    const auto v = value_from_betas(e_step(mdp, sc, stoch(mdp, pi), prior).betas, sc, prior);
    const auto q = discounted_truncated_q(mdp, pi, gamma, 400);
    for (StateId s = 0; s < mdp.num_states(); ++s) {
      if (mdp.is_goal(s)) continue;
      CHECK(v[s] == doctest::Approx(q(s, pi[s])).epsilon(1e-9));
    }
  }
}

TEST_CASE("forward marginals and action marginals") {
  const auto mdp = slip_chain();
  const auto pi = stoch(mdp, point({0, 0}));
  const auto post = forward_marginals(mdp, pi, 0, 3);
  for (std::size_t t = 0; t <= 3; ++t) {
    double sum = 0.0;
    for (double p : post.slice(t)) sum += p;
    CHECK(std::abs(sum - 1.0) < 1e-12);
    CHECK(post(t, 0) == std::pow(0.5, static_cast<double>(t)));
  }
  const auto am = action_marginals(post, pi);
  for (std::size_t t = 0; t <= 3; ++t) CHECK(am[t] == doctest::Approx(1.0));

  const auto two = two_action();
  const auto mixed = StochasticPolicy(2, 2, {0.25, 0.75, 1.0, 0.0});
  const auto am2 = action_marginals(forward_marginals(two, mixed, 0, 1), mixed);
  CHECK(am2[0] == 0.25);
  CHECK(am2[1] == 0.75);
  // After one step, state 0 with prob 0.75·0.5 and goal otherwise.
  CHECK(am2[2] == doctest::Approx(0.375 * 0.25 + 0.625));
  CHECK(am2[3] == doctest::Approx(0.375 * 0.75));
}
