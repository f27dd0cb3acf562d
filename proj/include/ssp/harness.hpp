#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ssp/dp_solver.hpp"
#include "ssp/inference.hpp"
#include "ssp/mdp.hpp"

namespace ssp {

/// Execute a precomputed policy.
struct OfflinePolicy {
  DeterministicPolicy policy;
};

/// Re-run policy iteration on the current model before every decision.
struct ReplanPolicy {
  EvalTermination term = EpsilonGreedy{};
};

/// Recompute a probabilistic plan by EM from the known current state before
/// every decision and execute the argmax of the first action marginal.
/// `sample_action` draws from the marginal instead (demonstration only).
struct ProbabilisticPlan {
  std::size_t t_max = 0;
  TimePrior::Kind prior = TimePrior::Kind::kFlat;
  double gamma = 0.95;
  bool sample_action = false;
};

/// Most-likely-outcome determinisation plus shortest-path planning;
/// replans when the observed state leaves the plan or the model changes.
struct DeterminizeReplan {};

using ExecutionMode = std::variant<OfflinePolicy, ReplanPolicy, ProbabilisticPlan, DeterminizeReplan>;

std::string mode_name(const ExecutionMode& mode);

/// Scripted change of the environment: from step `step` on, non-goal
/// transitions entering any of `states` cost `multiplier` times as much.
struct CostEvent {
  std::size_t step = 0;
  double multiplier = 1.0;
  std::vector<StateId> states;
};

struct Step {
  StateId state;
  ActionId action;
  double cost;
  StateId next_state;
};

struct Trajectory {
  std::vector<Step> steps;
  double total_cost = 0.0;
  bool reached_goal = false;
  /// Set when the mode could not produce an action (e.g. no plan exists).
  bool planning_failed = false;
  std::uint64_t seed = 0;
  std::chrono::duration<double> decision_time{0.0};
  std::size_t decisions = 0;
  /// Largest table (entries) the mode built for a single decision.
  std::size_t peak_table_entries = 0;
};

struct SimulationOptions {
  std::size_t max_steps = 1000;
  std::optional<CostEvent> event;
};

/// Runs one episode from `s0`. Successors are sampled from the model using a
/// generator seeded with `seed`. Exhausting max_steps is not an error; the
/// trajectory just reports reached_goal == false.
Trajectory simulate(const SspMdp& mdp, const ExecutionMode& mode, StateId s0, std::uint64_t seed,
                    const SimulationOptions& options = {});

/// Determinised model: one (successor, cost) per state-action pair.
struct DeterministicEdge {
  StateId next;
  double cost;
};

class DeterminizedMdp {
 public:
  DeterminizedMdp(std::size_t num_states, std::size_t num_actions, std::vector<DeterministicEdge> edges)
      : num_states_(num_states), num_actions_(num_actions), edges_(std::move(edges)) {}

  std::size_t num_states() const noexcept { return num_states_; }
  std::size_t num_actions() const noexcept { return num_actions_; }
  const DeterministicEdge& edge(StateId s, ActionId a) const { return edges_[s * num_actions_ + a]; }

 private:
  std::size_t num_states_;
  std::size_t num_actions_;
  std::vector<DeterministicEdge> edges_;
};

/// Keeps, for each (s,a), the most probable successor (lowest id on ties).
DeterminizedMdp determinize(const SspMdp& mdp);

/// Minimum-cost action sequence from `s0` to any goal; among minimal-cost
/// plans the lexicographically smallest. Throws PlanningError when no goal
/// is reachable.
std::vector<ActionId> shortest_path_plan(const DeterminizedMdp& det, StateId s0,
                                         const std::vector<StateId>& goals);

struct RolloutStats {
  std::size_t n = 0;
  double mean_cost = 0.0;
  double std_error = 0.0;
  double goal_rate = 0.0;
  std::chrono::duration<double> mean_wallclock_per_decision{0.0};
  std::size_t peak_table_entries = 0;
};

struct EvaluateOptions {
  SimulationOptions simulation;
  std::size_t workers = 1;
};

/// Seed of rollout `index` under base seed `seed`.
std::uint64_t rollout_seed(std::uint64_t seed, std::size_t index);

/// `n` independent rollouts, reduced in rollout order. Everything except the
/// wall-clock field is a function of the inputs alone.
RolloutStats evaluate_mode(const SspMdp& mdp, const ExecutionMode& mode, StateId s0, std::size_t n,
                           std::uint64_t seed, const EvaluateOptions& options = {});

/// The action `mode` takes in `state` of `mdp`, with no randomness involved
/// (sampling modes excepted). Exposed for mode-agreement checks.
ActionId decide(const SspMdp& mdp, const ExecutionMode& mode, StateId state);

}  // namespace ssp
