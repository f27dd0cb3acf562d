#include "ssp/inference.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ssp/errors.hpp"

namespace ssp {

ScaledCostModel scale_costs(const SspMdp& mdp) {
  ScaledCostModel out;
  out.num_states = mdp.num_states();
  out.num_actions = mdp.num_actions();
  std::vector<double> expected(out.num_states * out.num_actions, 0.0);
  for (StateId s = 0; s < out.num_states; ++s) {
    for (ActionId a = 0; a < out.num_actions; ++a) {
      expected[s * out.num_actions + a] = expected_cost(mdp, s, a);
    }
  }
  const auto [lo, hi] = std::minmax_element(expected.begin(), expected.end());
  out.min_cost = *lo;
  out.max_cost = *hi;
  const double range = out.max_cost - out.min_cost;
  if (!(range > 0.0)) throw DegenerateMdpError("all expected costs are equal; cannot scale");
  out.p_cost.resize(expected.size());
  for (std::size_t k = 0; k < expected.size(); ++k) {
    out.p_cost[k] = (expected[k] - out.min_cost) / range;
  }
  for (StateId g : mdp.goals()) {
    for (ActionId a = 0; a < out.num_actions; ++a) out.p_cost[g * out.num_actions + a] = 0.0;
  }
  return out;
}

TimePrior TimePrior::flat(std::size_t t_max) {
  return TimePrior(Kind::kFlat, 1.0,
                   std::vector<double>(t_max + 1, 1.0 / static_cast<double>(t_max + 1)));
}

TimePrior TimePrior::discounted(double gamma, std::size_t t_max) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw UsageError("gamma must lie in (0, 1)");
  std::vector<double> w(t_max + 1);
  double g = 1.0;
  double sum = 0.0;
  for (auto& x : w) {
    x = g * (1.0 - gamma);
    sum += x;
    g *= gamma;
  }
  for (auto& x : w) x /= sum;
  return TimePrior(Kind::kDiscounted, gamma, std::move(w));
}

EStepResult e_step(const SspMdp& mdp, const ScaledCostModel& scaled,
                   const StochasticPolicy& policy, const TimePrior& prior) {
  const std::size_t n = mdp.num_states();
  const std::size_t m = mdp.num_actions();
  if (scaled.num_states != n || scaled.num_actions != m || policy.num_states() != n ||
      policy.num_actions() != m) {
    throw UsageError("e_step inputs disagree on state/action counts");
  }
  const std::size_t t_max = prior.t_max();
  EStepResult out{BetaMessages(t_max, n), QFunction(n, m)};
  BetaMessages& beta = out.betas;

  for (StateId i = 0; i < n; ++i) {
    if (mdp.is_goal(i)) continue;
    double b = 0.0;
    for (ActionId a = 0; a < m; ++a) b += scaled(i, a) * policy.prob(i, a);
    beta(0, i) = b;
  }

  // q_τ(a,i) for τ ≥ 1 needs Σ_j p(j|i,a) β_{τ-1}(j); accumulating it while
  // sweeping τ avoids storing every q_τ layer.
  QFunction& q = out.q_prob;
  double weight_sum = prior.weight(0);
  for (StateId i = 0; i < n; ++i) {
    if (mdp.is_goal(i)) continue;
    for (ActionId a = 0; a < m; ++a) q(i, a) = prior.weight(0) * scaled(i, a);
  }

  for (std::size_t tau = 1; tau <= t_max; ++tau) {
    const double w = prior.weight(tau);
    weight_sum += w;
    for (StateId i = 0; i < n; ++i) {
      if (mdp.is_goal(i)) continue;
      double b = 0.0;
      for (ActionId a = 0; a < m; ++a) {
        double lookahead = 0.0;
        for (const auto& t : mdp.outcomes(i, a)) lookahead += t.prob * beta(tau - 1, t.next);
        q(i, a) += w * lookahead;
        const double pi = policy.prob(i, a);
        if (pi != 0.0) b += pi * lookahead;
      }
      beta(tau, i) = b;
    }
  }

  if (weight_sum > 0.0 && weight_sum != 1.0) {
    for (StateId i = 0; i < n; ++i) {
      for (ActionId a = 0; a < m; ++a) q(i, a) /= weight_sum;
    }
  }
  return out;
}

DeterministicPolicy m_step_greedy(const QFunction& q_prob) { return greedy_policy(q_prob); }

ValueFunction value_from_betas(const BetaMessages& betas, const ScaledCostModel& scaled,
                               const TimePrior& prior) {
  if (prior.t_max() != betas.t_max()) throw UsageError("prior and messages disagree on t_max");
  const double unscale = scaled.max_cost - scaled.min_cost;
  ValueFunction v(betas.num_states());
  for (StateId i = 0; i < betas.num_states(); ++i) {
    double sum = 0.0;
    if (prior.kind() == TimePrior::Kind::kFlat) {
      for (std::size_t tau = 0; tau <= betas.t_max(); ++tau) sum += betas(tau, i);
      v[i] = sum * unscale;
    } else {
      for (std::size_t tau = 0; tau <= betas.t_max(); ++tau) {
        sum += prior.weight(tau) * betas(tau, i);
      }
      v[i] = sum * unscale / (1.0 - prior.gamma());
    }
  }
  return v;
}

SolveReport em_solve(const SspMdp& mdp, const TimePrior& prior,
                     const std::optional<StochasticPolicy>& init, const EmOptions& options) {
  const ScaledCostModel scaled = scale_costs(mdp);
  StochasticPolicy policy =
      init ? *init : as_stochastic(backward_greedy_policy(mdp), mdp.num_actions());
  if (policy.num_states() != mdp.num_states() || policy.num_actions() != mdp.num_actions()) {
    throw UsageError("initial policy has wrong dimensions");
  }

  SolveReport report;
  std::optional<DeterministicPolicy> current;
  if (auto point = greedy_extract(policy); as_stochastic(point, mdp.num_actions()) == policy) {
    current = std::move(point);
  }
  std::set<std::vector<ActionId>> seen;
  if (current) seen.insert(current->actions());

  while (report.improvement_rounds < options.max_rounds) {
    EStepResult e = e_step(mdp, scaled, policy, prior);
    DeterministicPolicy improved = m_step_greedy(e.q_prob);

    std::size_t changed = mdp.num_states();
    if (current) {
      changed = 0;
      for (StateId s = 0; s < mdp.num_states(); ++s) changed += improved[s] != (*current)[s];
    }
    ++report.improvement_rounds;
    report.sweeps_total += prior.t_max() + 1;
    report.rounds.push_back({prior.t_max() + 1, changed});

    if (changed == 0) {
      report.policy = std::move(improved);
      report.values = value_from_betas(e.betas, scaled, prior);
      report.converged = true;
      return report;
    }
    if (!seen.insert(improved.actions()).second) {
      throw PolicyCycleError("EM revisited a policy that is not a fixed point");
    }
    current = improved;
    policy = as_stochastic(improved, mdp.num_actions());
  }
  report.policy = current ? *current : greedy_extract(policy);
  report.values = value_from_betas(e_step(mdp, scaled, policy, prior).betas, scaled, prior);
  return report;
}

TemporalStatePosterior forward_marginals(const SspMdp& mdp, const StochasticPolicy& policy,
                                         StateId s0, std::size_t horizon) {
  const std::size_t n = mdp.num_states();
  if (s0 >= n) throw UsageError("start state out of range");
  if (policy.num_states() != n || policy.num_actions() != mdp.num_actions()) {
    throw UsageError("policy dimensions do not match the MDP");
  }
  TemporalStatePosterior post(horizon, n);
  post(0, s0) = 1.0;
  for (std::size_t t = 1; t <= horizon; ++t) {
    for (StateId i = 0; i < n; ++i) {
      const double p = post(t - 1, i);
      if (p == 0.0) continue;
      for (ActionId a = 0; a < mdp.num_actions(); ++a) {
        const double pa = policy.prob(i, a);
        if (pa == 0.0) continue;
        for (const auto& tr : mdp.outcomes(i, a)) post(t, tr.next) += p * pa * tr.prob;
      }
    }
  }
  return post;
}

std::vector<double> action_marginals(const TemporalStatePosterior& posterior,
                                     const StochasticPolicy& policy) {
  const std::size_t m = policy.num_actions();
  std::vector<double> out((posterior.horizon() + 1) * m, 0.0);
  for (std::size_t t = 0; t <= posterior.horizon(); ++t) {
    for (StateId s = 0; s < posterior.num_states(); ++s) {
      const double p = posterior(t, s);
      if (p == 0.0) continue;
      for (ActionId a = 0; a < m; ++a) out[t * m + a] += p * policy.prob(s, a);
    }
  }
  return out;
}

}  // namespace ssp
