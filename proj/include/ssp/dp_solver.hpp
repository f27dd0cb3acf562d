#pragma once

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "ssp/mdp.hpp"

namespace ssp {

/// Stop evaluating once the largest per-state change of a sweep drops
/// below `epsilon`.
struct EpsilonGreedy {
  double epsilon = 1e-10;
  std::size_t sweep_cap = 1'000'000;
};

/// Stop after exactly `sweeps` synchronous sweeps.
struct Truncated {
  std::size_t sweeps = 1;
};

using EvalTermination = std::variant<EpsilonGreedy, Truncated>;

/// Any value above this is treated as divergence of an improper policy.
inline constexpr double kDivergenceValue = 1e12;

/// Bookkeeping for one evaluate/improve round.
struct RoundTrace {
  std::size_t sweeps = 0;
  std::size_t changed_states = 0;
};

struct SolveReport {
  DeterministicPolicy policy;
  ValueFunction values;
  std::size_t sweeps_total = 0;
  std::size_t improvement_rounds = 0;
  bool converged = false;
  std::vector<RoundTrace> rounds;
};

/// Iterative policy evaluation with synchronous (Jacobi) sweeps. Goal
/// entries are held at 0. `v0` defaults to all zeros.
///
/// Truncated(k) returns the value after exactly k sweeps, which from v0 = 0
/// is the expected cost of the first k steps. EpsilonGreedy throws
/// DivergenceError when the sweep cap is hit or a value exceeds
/// kDivergenceValue.
ValueFunction policy_evaluation(const SspMdp& mdp, const StochasticPolicy& policy,
                                const EvalTermination& term,
                                const std::optional<ValueFunction>& v0 = std::nullopt,
                                std::size_t* sweeps_done = nullptr);

ValueFunction policy_evaluation(const SspMdp& mdp, const DeterministicPolicy& policy,
                                const EvalTermination& term,
                                const std::optional<ValueFunction>& v0 = std::nullopt,
                                std::size_t* sweeps_done = nullptr);

/// Q(s,a) = Σ_{s'} T(s,a,s') [C(s,a,s') + V(s')], zero at goals.
QFunction compute_q(const SspMdp& mdp, const ValueFunction& v);

/// argmin_a Q(s,a), lowest action index among ties.
DeterministicPolicy policy_improvement(const QFunction& q);

struct PolicyIterationOptions {
  std::size_t max_rounds = 10'000;
};

/// Alternates evaluation (from v0 = 0 each round) and improvement until the
/// policy stops changing. `init` defaults to backward_greedy_policy. If a
/// policy recurs without being a fixed point (possible under truncated
/// evaluation) the loop stops with `converged == false`.
SolveReport policy_iteration(const SspMdp& mdp,
                             const std::optional<DeterministicPolicy>& init,
                             const EvalTermination& term,
                             const PolicyIterationOptions& options = {});

struct ValueIterationResult {
  ValueFunction values;
  DeterministicPolicy policy;
  std::size_t sweeps = 0;
};

/// Synchronous Bellman-optimality sweeps from V = 0 until the largest
/// change is below `epsilon`, then greedy extraction.
ValueIterationResult value_iteration(const SspMdp& mdp, double epsilon,
                                     std::size_t sweep_cap = 1'000'000);

}  // namespace ssp
