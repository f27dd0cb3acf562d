#include "ssp/dp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "ssp/errors.hpp"

namespace ssp {

namespace {

void check_sizes(const SspMdp& mdp, std::size_t states, std::size_t actions) {
  if (states != mdp.num_states() || actions != mdp.num_actions()) {
    throw UsageError("policy dimensions do not match the MDP");
  }
}

// One synchronous backup of `policy` against `v`.
void backup(const SspMdp& mdp, const StochasticPolicy& policy, const std::vector<double>& v,
            std::vector<double>& out) {
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (mdp.is_goal(s)) {
      out[s] = 0.0;
      continue;
    }
    double total = 0.0;
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      const double w = policy.prob(s, a);
      if (w == 0.0) continue;
      double q = 0.0;
      for (const auto& t : mdp.outcomes(s, a)) q += t.prob * (t.cost + v[t.next]);
      total += w * q;
    }
    out[s] = total;
  }
}

double max_change(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_value(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

ValueFunction policy_evaluation(const SspMdp& mdp, const StochasticPolicy& policy,
                                const EvalTermination& term,
                                const std::optional<ValueFunction>& v0,
                                std::size_t* sweeps_done) {
  check_sizes(mdp, policy.num_states(), policy.num_actions());
  std::vector<double> v = v0 ? v0->v : std::vector<double>(mdp.num_states(), 0.0);
  if (v.size() != mdp.num_states()) throw UsageError("initial value function has wrong size");
  for (StateId g : mdp.goals()) v[g] = 0.0;
  std::vector<double> next(v.size(), 0.0);
  std::size_t sweeps = 0;

  if (const auto* tr = std::get_if<Truncated>(&term)) {
    if (tr->sweeps < 1) throw UsageError("truncated evaluation needs at least one sweep");
    for (; sweeps < tr->sweeps; ++sweeps) {
      backup(mdp, policy, v, next);
      v.swap(next);
    }
  } else {
    const auto& eg = std::get<EpsilonGreedy>(term);
    if (!(eg.epsilon > 0.0)) throw UsageError("epsilon must be positive");
    while (true) {
      if (sweeps >= eg.sweep_cap) {
        throw DivergenceError("policy evaluation did not converge within " +
                              std::to_string(eg.sweep_cap) + " sweeps (improper policy?)");
      }
      backup(mdp, policy, v, next);
      ++sweeps;
      const double delta = max_change(v, next);
      v.swap(next);
      if (!std::isfinite(delta) || max_value(v) > kDivergenceValue) {
        throw DivergenceError("policy evaluation diverged (improper policy?)");
      }
      if (delta < eg.epsilon) break;
    }
  }
  if (sweeps_done) *sweeps_done = sweeps;
  return ValueFunction(std::move(v));
}

ValueFunction policy_evaluation(const SspMdp& mdp, const DeterministicPolicy& policy,
                                const EvalTermination& term,
                                const std::optional<ValueFunction>& v0,
                                std::size_t* sweeps_done) {
  return policy_evaluation(mdp, as_stochastic(policy, mdp.num_actions()), term, v0, sweeps_done);
}

QFunction compute_q(const SspMdp& mdp, const ValueFunction& v) {
  if (v.size() != mdp.num_states()) throw UsageError("value function has wrong size");
  QFunction q(mdp.num_states(), mdp.num_actions());
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (mdp.is_goal(s)) continue;
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      double sum = 0.0;
      for (const auto& t : mdp.outcomes(s, a)) sum += t.prob * (t.cost + v[t.next]);
      q(s, a) = sum;
    }
  }
  return q;
}

DeterministicPolicy policy_improvement(const QFunction& q) { return greedy_policy(q); }

SolveReport policy_iteration(const SspMdp& mdp, const std::optional<DeterministicPolicy>& init,
                             const EvalTermination& term, const PolicyIterationOptions& options) {
  SolveReport report;
  DeterministicPolicy policy = init ? *init : backward_greedy_policy(mdp);
  if (policy.num_states() != mdp.num_states()) throw UsageError("initial policy has wrong size");
  std::set<std::vector<ActionId>> seen{policy.actions()};

  while (report.improvement_rounds < options.max_rounds) {
    std::size_t sweeps = 0;
    ValueFunction v = policy_evaluation(mdp, policy, term, std::nullopt, &sweeps);
    DeterministicPolicy improved = policy_improvement(compute_q(mdp, v));
    std::size_t changed = 0;
    for (StateId s = 0; s < mdp.num_states(); ++s) changed += improved[s] != policy[s];

    ++report.improvement_rounds;
    report.sweeps_total += sweeps;
    report.rounds.push_back({sweeps, changed});

    if (changed == 0) {
      report.policy = std::move(policy);
      report.values = std::move(v);
      report.converged = true;
      return report;
    }
    if (!seen.insert(improved.actions()).second) {
      report.policy = std::move(improved);
      report.values = policy_evaluation(mdp, report.policy, term);
      return report;
    }
    policy = std::move(improved);
  }
  report.policy = policy;
  report.values = policy_evaluation(mdp, policy, term);
  return report;
}

ValueIterationResult value_iteration(const SspMdp& mdp, double epsilon, std::size_t sweep_cap) {
  if (!(epsilon > 0.0)) throw UsageError("epsilon must be positive");
  std::vector<double> v(mdp.num_states(), 0.0);
  std::vector<double> next(v.size(), 0.0);
  std::size_t sweeps = 0;
  while (true) {
    if (sweeps >= sweep_cap) {
      throw DivergenceError("value iteration did not converge within " +
                            std::to_string(sweep_cap) + " sweeps");
    }
    for (StateId s = 0; s < mdp.num_states(); ++s) {
      if (mdp.is_goal(s)) {
        next[s] = 0.0;
        continue;
      }
      double best = 0.0;
      for (ActionId a = 0; a < mdp.num_actions(); ++a) {
        double q = 0.0;
        for (const auto& t : mdp.outcomes(s, a)) q += t.prob * (t.cost + v[t.next]);
        best = a == 0 ? q : std::min(best, q);
      }
      next[s] = best;
    }
    ++sweeps;
    const double delta = max_change(v, next);
    v.swap(next);
    if (!std::isfinite(delta) || max_value(v) > kDivergenceValue) {
      throw DivergenceError("value iteration diverged");
    }
    if (delta < epsilon) break;
  }
  ValueIterationResult out;
  out.values = ValueFunction(std::move(v));
  out.policy = policy_improvement(compute_q(mdp, out.values));
  out.sweeps = sweeps;
  return out;
}

}  // namespace ssp
