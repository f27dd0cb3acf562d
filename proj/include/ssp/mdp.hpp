#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ssp {

using StateId = std::size_t;
using ActionId = std::size_t;

/// One outcome of applying an action: successor, probability, and the cost
/// charged on that transition.
struct Transition {
  StateId next;
  double prob;
  double cost;

  friend bool operator==(const Transition&, const Transition&) = default;
};

class SspMdpBuilder;

/**
 * Stochastic shortest-path MDP over dense state and action indices.
 *
 * Transitions are stored per (state, action) row, sorted by successor.
 * Every action is nominally available in every state. Instances are
 * immutable; use SspMdpBuilder to construct one. Construction does not
 * check the SSP assumptions, call validate() for that.
 */
class SspMdp {
 public:
  std::size_t num_states() const noexcept { return num_states_; }
  std::size_t num_actions() const noexcept { return num_actions_; }

  /// Outcomes of applying `a` in `s`. Throws UsageError on bad indices.
  std::span<const Transition> outcomes(StateId s, ActionId a) const;

  bool is_goal(StateId s) const;
  /// Goal states in increasing order.
  const std::vector<StateId>& goals() const noexcept { return goals_; }
  const std::optional<StateId>& start() const noexcept { return start_; }

  /// Total number of stored transition entries.
  std::size_t num_entries() const noexcept { return entries_.size(); }

  /// Copy with every transition cost multiplied by `factor`.
  SspMdp with_scaled_costs(double factor) const;

  /// Copy where non-goal transitions entering any state in `targets` have
  /// their cost multiplied by `factor`.
  SspMdp with_cost_multiplier(std::span<const StateId> targets, double factor) const;

  friend bool operator==(const SspMdp&, const SspMdp&) = default;

 private:
  friend class SspMdpBuilder;
  SspMdp() = default;

  std::size_t row(StateId s, ActionId a) const;

  std::size_t num_states_ = 0;
  std::size_t num_actions_ = 0;
  std::vector<std::size_t> offsets_;  // num_states * num_actions + 1
  std::vector<Transition> entries_;
  std::vector<StateId> goals_;
  std::vector<char> goal_mask_;
  std::optional<StateId> start_;
};

/// Incremental construction of an SspMdp.
class SspMdpBuilder {
 public:
  SspMdpBuilder(std::size_t num_states, std::size_t num_actions);

  /// Adds (s, a) -> next. Throws UsageError on bad indices or when the
  /// triple was already added.
  SspMdpBuilder& add(StateId s, ActionId a, StateId next, double prob, double cost);

  /// Marks `g` as a goal and gives it the absorbing zero-cost self-loop
  /// for every action.
  SspMdpBuilder& add_absorbing_goal(StateId g);

  /// Marks `g` as a goal without adding transitions.
  SspMdpBuilder& mark_goal(StateId g);
  SspMdpBuilder& set_start(StateId s);

  bool has(StateId s, ActionId a, StateId next) const;

  SspMdp build() const;

 private:
  std::size_t num_states_;
  std::size_t num_actions_;
  std::vector<std::vector<Transition>> rows_;
  std::vector<char> goal_mask_;
  std::optional<StateId> start_;
};

/// C̄(s,a) = Σ_{s'} T(s,a,s') C(s,a,s').
double expected_cost(const SspMdp& mdp, StateId s, ActionId a);

// ---------------------------------------------------------------------------
// Policies and value containers

/// State -> action map, total over all states including goals.
class DeterministicPolicy {
 public:
  DeterministicPolicy() = default;
  explicit DeterministicPolicy(std::vector<ActionId> actions) : actions_(std::move(actions)) {}
  DeterministicPolicy(std::size_t num_states, ActionId fill) : actions_(num_states, fill) {}

  std::size_t num_states() const noexcept { return actions_.size(); }
  ActionId operator[](StateId s) const { return actions_[s]; }
  ActionId& operator[](StateId s) { return actions_[s]; }
  const std::vector<ActionId>& actions() const noexcept { return actions_; }

  friend bool operator==(const DeterministicPolicy&, const DeterministicPolicy&) = default;

 private:
  std::vector<ActionId> actions_;
};

/// State -> distribution over actions (row-major, one row per state).
class StochasticPolicy {
 public:
  StochasticPolicy() = default;
  /// Uniform rows.
  StochasticPolicy(std::size_t num_states, std::size_t num_actions);
  StochasticPolicy(std::size_t num_states, std::size_t num_actions, std::vector<double> probs);

  std::size_t num_states() const noexcept { return num_states_; }
  std::size_t num_actions() const noexcept { return num_actions_; }
  std::span<const double> row(StateId s) const;
  double prob(StateId s, ActionId a) const { return probs_[s * num_actions_ + a]; }

  /// True when every row lies in [0,1] and sums to 1 within `tol`.
  bool is_normalized(double tol = 1e-9) const;

  friend bool operator==(const StochasticPolicy&, const StochasticPolicy&) = default;

 private:
  std::size_t num_states_ = 0;
  std::size_t num_actions_ = 0;
  std::vector<double> probs_;
};

StochasticPolicy as_stochastic(const DeterministicPolicy& policy, std::size_t num_actions);

/// Most probable action per state, lowest index on ties.
DeterministicPolicy greedy_extract(const StochasticPolicy& policy);

/// Expected cost-to-go per state.
struct ValueFunction {
  std::vector<double> v;

  ValueFunction() = default;
  explicit ValueFunction(std::size_t n) : v(n, 0.0) {}
  explicit ValueFunction(std::vector<double> values) : v(std::move(values)) {}

  std::size_t size() const noexcept { return v.size(); }
  double operator[](StateId s) const { return v[s]; }
  double& operator[](StateId s) { return v[s]; }
};

/// Per state-action table, row-major by state. Holds either expected
/// cost-to-go or, for the inference solver, cost-event probabilities.
class QFunction {
 public:
  QFunction() = default;
  QFunction(std::size_t num_states, std::size_t num_actions)
      : num_states_(num_states), num_actions_(num_actions), q_(num_states * num_actions, 0.0) {}

  std::size_t num_states() const noexcept { return num_states_; }
  std::size_t num_actions() const noexcept { return num_actions_; }
  double operator()(StateId s, ActionId a) const { return q_[s * num_actions_ + a]; }
  double& operator()(StateId s, ActionId a) { return q_[s * num_actions_ + a]; }
  std::span<const double> row(StateId s) const {
    return {q_.data() + s * num_actions_, num_actions_};
  }

 private:
  std::size_t num_states_ = 0;
  std::size_t num_actions_ = 0;
  std::vector<double> q_;
};

/// Relative tolerance under which two Q entries count as tied. Both solvers
/// share it so that their greedy steps break ties identically.
inline constexpr double kTieRelTol = 1e-10;

/// Lowest-index action whose entry is within kTieRelTol of the row minimum.
ActionId greedy_action(std::span<const double> row);

/// greedy_action applied to every row.
DeterministicPolicy greedy_policy(const QFunction& q);

// ---------------------------------------------------------------------------
// Validation

enum class ViolationKind {
  kProbabilityRange,
  kRowSum,
  kCostRange,
  kGoalNotAbsorbing,
  kGoalCost,
  kNonPositiveCost,
  kGoalUnreachable,
  kNoGoal,
  kBadStart,
};

/// One failed check. Fields that do not apply are left empty.
struct Violation {
  ViolationKind kind;
  std::optional<StateId> state;
  std::optional<ActionId> action;
  std::optional<StateId> next;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
  bool has(ViolationKind kind) const;
};

/// Smallest cost accepted on a non-goal transition.
inline constexpr double kMinPositiveCost = 1e-12;
inline constexpr double kRowSumTol = 1e-9;

/// Checks the mechanically testable SSP assumptions. Never throws on a
/// malformed model; every problem is reported.
ValidationReport validate(const SspMdp& mdp);

/// States from which some goal is reachable along positive-probability
/// transitions of any action.
std::vector<char> goal_reachable_any_action(const SspMdp& mdp);

/// Breadth-first distance to the nearest goal in the all-actions graph;
/// SIZE_MAX where no goal is reachable.
std::vector<std::size_t> goal_distances(const SspMdp& mdp);

/// True when following `policy` reaches a goal with probability 1 from
/// every state.
bool is_proper(const SspMdp& mdp, const DeterministicPolicy& policy);

/// Proper starting policy: in each state, the action with the largest
/// one-step probability of moving strictly closer (BFS distance) to a goal.
/// Ties go to the lowest action index; goals get action 0.
DeterministicPolicy backward_greedy_policy(const SspMdp& mdp);

}  // namespace ssp
