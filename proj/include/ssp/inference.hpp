#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ssp/dp_solver.hpp"
#include "ssp/mdp.hpp"

namespace ssp {

/// Expected costs mapped affinely onto [0,1], read as the probability that
/// the binary cost event fires: p = (C̄(s,a) - min) / (max - min).
struct ScaledCostModel {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::vector<double> p_cost;  // row-major by state
  double max_cost = 0.0;
  double min_cost = 0.0;

  double operator()(StateId s, ActionId a) const { return p_cost[s * num_actions + a]; }
};

/// Throws DegenerateMdpError when every expected cost is equal.
ScaledCostModel scale_costs(const SspMdp& mdp);

/// Distribution over the number of remaining steps τ ∈ [0, t_max].
class TimePrior {
 public:
  enum class Kind { kFlat, kDiscounted };

  static TimePrior flat(std::size_t t_max);
  /// Weights ∝ γ^τ (1 - γ), renormalised over the truncated support.
  static TimePrior discounted(double gamma, std::size_t t_max);

  Kind kind() const noexcept { return kind_; }
  double gamma() const noexcept { return gamma_; }
  std::size_t t_max() const noexcept { return weights_.size() - 1; }
  std::span<const double> weights() const noexcept { return weights_; }
  double weight(std::size_t tau) const { return weights_[tau]; }

 private:
  TimePrior(Kind kind, double gamma, std::vector<double> weights)
      : kind_(kind), gamma_(gamma), weights_(std::move(weights)) {}

  Kind kind_;
  double gamma_;
  std::vector<double> weights_;
};

/// β_τ(i): probability of the cost event when τ steps remain in state i.
class BetaMessages {
 public:
  BetaMessages() = default;
  BetaMessages(std::size_t t_max, std::size_t num_states)
      : t_max_(t_max), num_states_(num_states), beta_((t_max + 1) * num_states, 0.0) {}

  std::size_t t_max() const noexcept { return t_max_; }
  std::size_t num_states() const noexcept { return num_states_; }
  double operator()(std::size_t tau, StateId i) const { return beta_[tau * num_states_ + i]; }
  double& operator()(std::size_t tau, StateId i) { return beta_[tau * num_states_ + i]; }
  std::span<const double> layer(std::size_t tau) const {
    return {beta_.data() + tau * num_states_, num_states_};
  }

 private:
  std::size_t t_max_ = 0;
  std::size_t num_states_ = 0;
  std::vector<double> beta_;
};

struct EStepResult {
  BetaMessages betas;
  /// Time-marginalised P(c=1 | a, s; π).
  QFunction q_prob;
};

/// Backward message pass over the mixture of finite-horizon models:
///   β_0(i) = Σ_a p_cost(i,a) π(a|i)
///   β_τ(i) = Σ_j p(j|i;π) β_{τ-1}(j)
///   q_0(a,i) = p_cost(i,a),  q_τ(a,i) = Σ_j p(j|i,a) β_{τ-1}(j)  (τ ≥ 1)
///   Q_prob(i,a) = Σ_τ w(τ) q_τ(a,i) / Σ_τ w(τ)
EStepResult e_step(const SspMdp& mdp, const ScaledCostModel& scaled,
                   const StochasticPolicy& policy, const TimePrior& prior);

/// Greedy M-step: argmin_a Q_prob(s,a) with the shared tie rule.
DeterministicPolicy m_step_greedy(const QFunction& q_prob);

/// Cost-to-go recovered from the messages. Flat prior: max_cost · Σ_τ β_τ,
/// which equals truncated evaluation with t_max + 1 sweeps from zero.
/// Discounted prior: max_cost / (1 - γ) · Σ_τ w(τ) β_τ.
ValueFunction value_from_betas(const BetaMessages& betas, const ScaledCostModel& scaled,
                               const TimePrior& prior);

struct EmOptions {
  std::size_t max_rounds = 10'000;
};

/// Expectation-maximisation: alternate e_step and m_step_greedy until the
/// policy is unchanged. `init` defaults to the point masses of
/// backward_greedy_policy. Throws PolicyCycleError if a policy recurs
/// without being a fixed point.
SolveReport em_solve(const SspMdp& mdp, const TimePrior& prior,
                     const std::optional<StochasticPolicy>& init = std::nullopt,
                     const EmOptions& options = {});

/// Forward temporal-state marginals p(s_t), t = 0..horizon, from a known
/// start state.
class TemporalStatePosterior {
 public:
  TemporalStatePosterior(std::size_t horizon, std::size_t num_states)
      : horizon_(horizon), num_states_(num_states), dist_((horizon + 1) * num_states, 0.0) {}

  std::size_t horizon() const noexcept { return horizon_; }
  std::size_t num_states() const noexcept { return num_states_; }
  double operator()(std::size_t t, StateId s) const { return dist_[t * num_states_ + s]; }
  double& operator()(std::size_t t, StateId s) { return dist_[t * num_states_ + s]; }
  std::span<const double> slice(std::size_t t) const {
    return {dist_.data() + t * num_states_, num_states_};
  }

 private:
  std::size_t horizon_;
  std::size_t num_states_;
  std::vector<double> dist_;
};

TemporalStatePosterior forward_marginals(const SspMdp& mdp, const StochasticPolicy& policy,
                                         StateId s0, std::size_t horizon);

/// p(a_t) = Σ_s π(a|s) p(s_t) for each t; row-major (t, action).
std::vector<double> action_marginals(const TemporalStatePosterior& posterior,
                                     const StochasticPolicy& policy);

}  // namespace ssp
