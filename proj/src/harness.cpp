#include "ssp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <random>
#include <thread>

#include "ssp/errors.hpp"
#include "ssp/random_mdp.hpp"

namespace ssp {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

StateId sample_successor(std::span<const Transition> outcomes, double u) {
  double acc = 0.0;
  for (const auto& t : outcomes) {
    acc += t.prob;
    if (u < acc) return t.next;
  }
  // Rounding left u above the accumulated mass; take the last positive outcome.
  for (auto it = outcomes.rbegin(); it != outcomes.rend(); ++it) {
    if (it->prob > 0.0) return it->next;
  }
  return outcomes.back().next;
}

TimePrior make_prior(const ProbabilisticPlan& p, std::size_t num_states) {
  const std::size_t t_max = p.t_max ? p.t_max : 2 * num_states;
  return p.prior == TimePrior::Kind::kFlat ? TimePrior::flat(t_max)
                                           : TimePrior::discounted(p.gamma, t_max);
}

void check_mode(const SspMdp& mdp, const ExecutionMode& mode) {
  std::visit(overloaded{
                 [&](const OfflinePolicy& m) {
                   if (m.policy.num_states() != mdp.num_states()) {
                     throw UsageError("offline policy size does not match the MDP");
                   }
                   for (ActionId a : m.policy.actions()) {
                     if (a >= mdp.num_actions()) throw UsageError("offline policy action out of range");
                   }
                 },
                 [&](const ReplanPolicy& m) {
                   if (const auto* e = std::get_if<EpsilonGreedy>(&m.term); e && !(e->epsilon > 0.0)) {
                     throw UsageError("replan epsilon must be positive");
                   }
                   if (const auto* t = std::get_if<Truncated>(&m.term); t && t->sweeps < 1) {
                     throw UsageError("replan sweeps must be at least 1");
                   }
                 },
                 [&](const ProbabilisticPlan& m) {
                   if (m.prior == TimePrior::Kind::kDiscounted && !(m.gamma > 0.0 && m.gamma < 1.0)) {
                     throw UsageError("gamma must lie in (0, 1)");
                   }
                 },
                 [](const DeterminizeReplan&) {},
             },
             mode);
}

// Per-episode decision maker. Holds the determinisation plan between steps.
class Decider {
 public:
  explicit Decider(const ExecutionMode& mode) : mode_(mode) {}

  // Returns nullopt when the mode cannot act (no plan).
  std::optional<ActionId> operator()(const SspMdp& model, std::size_t model_version, StateId s,
                                     std::mt19937_64& rng, std::size_t& table_entries) {
    return std::visit(
        overloaded{
            [&](const OfflinePolicy& m) -> std::optional<ActionId> {
              table_entries = m.policy.num_states();
              return m.policy[s];
            },
            [&](const ReplanPolicy& m) -> std::optional<ActionId> {
              table_entries = model.num_states() * (1 + model.num_actions());
              return policy_iteration(model, std::nullopt, m.term).policy[s];
            },
            [&](const ProbabilisticPlan& m) -> std::optional<ActionId> {
              const TimePrior prior = make_prior(m, model.num_states());
              const SolveReport solved = em_solve(model, prior);
              const StochasticPolicy pi = as_stochastic(solved.policy, model.num_actions());
              const TemporalStatePosterior plan = forward_marginals(model, pi, s, prior.t_max());
              const std::vector<double> marginals = action_marginals(plan, pi);
              table_entries = 2 * (prior.t_max() + 1) * model.num_states() +
                              model.num_states() * model.num_actions() + marginals.size();
              const std::span<const double> first(marginals.data(), model.num_actions());
              if (m.sample_action) {
                const double u = uniform01(rng);
                double acc = 0.0;
                for (ActionId a = 0; a < first.size(); ++a) {
                  acc += first[a];
                  if (u < acc) return a;
                }
              }
              return static_cast<ActionId>(std::max_element(first.begin(), first.end()) -
                                           first.begin());
            },
            [&](const DeterminizeReplan&) -> std::optional<ActionId> {
              if (!det_ || det_version_ != model_version) {
                det_ = determinize(model);
                det_version_ = model_version;
                plan_.clear();
              }
              table_entries = model.num_states() * model.num_actions();
              if (plan_pos_ >= plan_.size() || expected_ != s) {
                try {
                  plan_ = shortest_path_plan(*det_, s, model.goals());
                } catch (const PlanningError&) {
                  return std::nullopt;
                }
                plan_pos_ = 0;
                if (plan_.empty()) return std::nullopt;
              }
              const ActionId a = plan_[plan_pos_++];
              expected_ = det_->edge(s, a).next;
              return a;
            },
        },
        mode_);
  }

 private:
  const ExecutionMode& mode_;
  std::optional<DeterminizedMdp> det_;
  std::size_t det_version_ = 0;
  std::vector<ActionId> plan_;
  std::size_t plan_pos_ = 0;
  StateId expected_ = std::numeric_limits<StateId>::max();
};

}  // namespace

std::string mode_name(const ExecutionMode& mode) {
  return std::visit(overloaded{
                        [](const OfflinePolicy&) { return std::string("offline"); },
                        [](const ReplanPolicy&) { return std::string("replan"); },
                        [](const ProbabilisticPlan&) { return std::string("probplan"); },
                        [](const DeterminizeReplan&) { return std::string("determinize"); },
                    },
                    mode);
}

Trajectory simulate(const SspMdp& mdp, const ExecutionMode& mode, StateId s0, std::uint64_t seed,
                    const SimulationOptions& options) {
  if (s0 >= mdp.num_states()) throw UsageError("start state out of range");
  if (options.max_steps < 1) throw UsageError("max_steps must be at least 1");
  check_mode(mdp, mode);

  Trajectory traj;
  traj.seed = seed;
  std::mt19937_64 rng(seed);
  Decider decider(mode);

  std::optional<SspMdp> changed;
  std::size_t version = 0;
  StateId s = s0;
  while (!mdp.is_goal(s) && traj.steps.size() < options.max_steps) {
    if (options.event && !changed && traj.steps.size() >= options.event->step) {
      changed = mdp.with_cost_multiplier(options.event->states, options.event->multiplier);
      ++version;
    }
    const SspMdp& model = changed ? *changed : mdp;

    std::size_t entries = 0;
    const auto t0 = std::chrono::steady_clock::now();
    const std::optional<ActionId> action = decider(model, version, s, rng, entries);
    traj.decision_time += std::chrono::steady_clock::now() - t0;
    ++traj.decisions;
    traj.peak_table_entries = std::max(traj.peak_table_entries, entries);
    if (!action) {
      traj.planning_failed = true;
      break;
    }

    const auto outcomes = model.outcomes(s, *action);
    if (outcomes.empty()) throw UsageError("action has no outcomes in the model");
    const StateId next = sample_successor(outcomes, uniform01(rng));
    double cost = 0.0;
    for (const auto& t : outcomes) {
      if (t.next == next) cost = t.cost;
    }
    traj.steps.push_back({s, *action, cost, next});
    traj.total_cost += cost;
    s = next;
  }
  traj.reached_goal = mdp.is_goal(s);
  return traj;
}

DeterminizedMdp determinize(const SspMdp& mdp) {
  std::vector<DeterministicEdge> edges;
  edges.reserve(mdp.num_states() * mdp.num_actions());
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      const auto out = mdp.outcomes(s, a);
      if (out.empty()) throw UsageError("state-action pair without outcomes");
      // Outcomes are sorted by successor, so strict '>' keeps the lowest id on ties.
      const Transition* best = &out.front();
      for (const auto& t : out) {
        if (t.prob > best->prob) best = &t;
      }
      edges.push_back({best->next, best->cost});
    }
  }
  return DeterminizedMdp(mdp.num_states(), mdp.num_actions(), std::move(edges));
}

std::vector<ActionId> shortest_path_plan(const DeterminizedMdp& det, StateId s0,
                                         const std::vector<StateId>& goals) {
  const std::size_t n = det.num_states();
  if (s0 >= n) throw UsageError("start state out of range");
  std::vector<char> is_goal(n, 0);
  for (StateId g : goals) is_goal.at(g) = 1;
  if (is_goal[s0]) return {};

  // Dijkstra on the reversed graph gives cost-to-goal for every state.
  std::vector<std::vector<std::pair<StateId, double>>> preds(n);
  for (StateId s = 0; s < n; ++s) {
    if (is_goal[s]) continue;
    for (ActionId a = 0; a < det.num_actions(); ++a) {
      const auto& e = det.edge(s, a);
      if (e.next != s) preds[e.next].push_back({s, e.cost});
    }
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, kInf);
  using Item = std::pair<double, StateId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  for (StateId g : goals) {
    dist[g] = 0.0;
    heap.push({0.0, g});
  }
  while (!heap.empty()) {
    const auto [d, j] = heap.top();
    heap.pop();
    if (d > dist[j]) continue;
    for (const auto& [i, c] : preds[j]) {
      if (d + c < dist[i]) {
        dist[i] = d + c;
        heap.push({dist[i], i});
      }
    }
  }
  if (dist[s0] == kInf) {
    throw PlanningError("no goal reachable from state " + std::to_string(s0) +
                        " in the determinised model");
  }

  // Walk forward taking the lowest action that stays on a minimal-cost path.
  std::vector<ActionId> plan;
  StateId s = s0;
  while (!is_goal[s]) {
    const double tol = 1e-12 * std::max(1.0, dist[s]);
    std::optional<ActionId> pick;
    for (ActionId a = 0; a < det.num_actions(); ++a) {
      const auto& e = det.edge(s, a);
      if (e.next == s || dist[e.next] == kInf) continue;
      if (e.cost + dist[e.next] <= dist[s] + tol && dist[e.next] < dist[s]) {
        pick = a;
        break;
      }
    }
    if (!pick) throw PlanningError("shortest-path reconstruction failed");
    plan.push_back(*pick);
    s = det.edge(s, *pick).next;
    if (plan.size() > n) throw PlanningError("shortest-path reconstruction looped");
  }
  return plan;
}

std::uint64_t rollout_seed(std::uint64_t seed, std::size_t index) { return split_seed(seed, index); }

RolloutStats evaluate_mode(const SspMdp& mdp, const ExecutionMode& mode, StateId s0, std::size_t n,
                           std::uint64_t seed, const EvaluateOptions& options) {
  if (n < 1) throw UsageError("need at least one rollout");
  check_mode(mdp, mode);
  std::vector<Trajectory> runs(n);
  const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, n);
  auto work = [&](std::size_t w) {
    for (std::size_t k = w; k < n; k += workers) {
      runs[k] = simulate(mdp, mode, s0, rollout_seed(seed, k), options.simulation);
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }

  RolloutStats stats;
  stats.n = n;
  double sum = 0.0;
  std::size_t reached = 0;
  std::size_t decisions = 0;
  std::chrono::duration<double> time{0.0};
  for (const auto& r : runs) {
    sum += r.total_cost;
    reached += r.reached_goal;
    decisions += r.decisions;
    time += r.decision_time;
    stats.peak_table_entries = std::max(stats.peak_table_entries, r.peak_table_entries);
  }
  stats.mean_cost = sum / static_cast<double>(n);
  if (n > 1) {
    double ss = 0.0;
    for (const auto& r : runs) ss += (r.total_cost - stats.mean_cost) * (r.total_cost - stats.mean_cost);
    stats.std_error = std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
  }
  stats.goal_rate = static_cast<double>(reached) / static_cast<double>(n);
  if (decisions) stats.mean_wallclock_per_decision = time / static_cast<double>(decisions);
  return stats;
}

ActionId decide(const SspMdp& mdp, const ExecutionMode& mode, StateId state) {
  check_mode(mdp, mode);
  if (state >= mdp.num_states()) throw UsageError("state out of range");
  Decider decider(mode);
  std::mt19937_64 rng(0);
  std::size_t entries = 0;
  const auto a = decider(mdp, 0, state, rng, entries);
  if (!a) throw PlanningError("mode produced no action in state " + std::to_string(state));
  return *a;
}

}  // namespace ssp
