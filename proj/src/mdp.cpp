#include "ssp/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include "ssp/errors.hpp"

namespace ssp {

namespace {

std::string triple(StateId s, ActionId a, StateId next) {
  std::ostringstream os;
  os << "(" << s << "," << a << "," << next << ")";
  return os.str();
}

std::string pair(StateId s, ActionId a) {
  std::ostringstream os;
  os << "(" << s << "," << a << ")";
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// SspMdp

std::size_t SspMdp::row(StateId s, ActionId a) const {
  if (s >= num_states_ || a >= num_actions_) {
    throw UsageError("state/action " + pair(s, a) + " out of range");
  }
  return s * num_actions_ + a;
}

std::span<const Transition> SspMdp::outcomes(StateId s, ActionId a) const {
  const std::size_t r = row(s, a);
  return {entries_.data() + offsets_[r], offsets_[r + 1] - offsets_[r]};
}

bool SspMdp::is_goal(StateId s) const {
  if (s >= num_states_) throw UsageError("state " + std::to_string(s) + " out of range");
  return goal_mask_[s] != 0;
}

SspMdp SspMdp::with_scaled_costs(double factor) const {
  SspMdp copy = *this;
  for (auto& t : copy.entries_) t.cost *= factor;
  return copy;
}

SspMdp SspMdp::with_cost_multiplier(std::span<const StateId> targets, double factor) const {
  std::vector<char> hit(num_states_, 0);
  for (StateId t : targets) {
    if (t >= num_states_) throw UsageError("state " + std::to_string(t) + " out of range");
    hit[t] = 1;
  }
  SspMdp copy = *this;
  for (StateId s = 0; s < num_states_; ++s) {
    if (goal_mask_[s]) continue;
    for (std::size_t r = s * num_actions_; r < (s + 1) * num_actions_; ++r) {
      for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) {
        if (hit[copy.entries_[k].next]) copy.entries_[k].cost *= factor;
      }
    }
  }
  return copy;
}

// ---------------------------------------------------------------------------
// SspMdpBuilder

SspMdpBuilder::SspMdpBuilder(std::size_t num_states, std::size_t num_actions)
    : num_states_(num_states),
      num_actions_(num_actions),
      rows_(num_states * num_actions),
      goal_mask_(num_states, 0) {
  if (num_states == 0 || num_actions == 0) {
    throw UsageError("an MDP needs at least one state and one action");
  }
}

SspMdpBuilder& SspMdpBuilder::add(StateId s, ActionId a, StateId next, double prob, double cost) {
  if (s >= num_states_ || a >= num_actions_ || next >= num_states_) {
    throw UsageError("transition " + triple(s, a, next) + " out of range");
  }
  if (has(s, a, next)) throw UsageError("duplicate transition " + triple(s, a, next));
  rows_[s * num_actions_ + a].push_back({next, prob, cost});
  return *this;
}

SspMdpBuilder& SspMdpBuilder::add_absorbing_goal(StateId g) {
  mark_goal(g);
  for (ActionId a = 0; a < num_actions_; ++a) add(g, a, g, 1.0, 0.0);
  return *this;
}

SspMdpBuilder& SspMdpBuilder::mark_goal(StateId g) {
  if (g >= num_states_) throw UsageError("goal " + std::to_string(g) + " out of range");
  goal_mask_[g] = 1;
  return *this;
}

SspMdpBuilder& SspMdpBuilder::set_start(StateId s) {
  if (s >= num_states_) throw UsageError("start " + std::to_string(s) + " out of range");
  start_ = s;
  return *this;
}

bool SspMdpBuilder::has(StateId s, ActionId a, StateId next) const {
  const auto& r = rows_[s * num_actions_ + a];
  return std::any_of(r.begin(), r.end(), [&](const Transition& t) { return t.next == next; });
}

SspMdp SspMdpBuilder::build() const {
  SspMdp mdp;
  mdp.num_states_ = num_states_;
  mdp.num_actions_ = num_actions_;
  mdp.offsets_.reserve(rows_.size() + 1);
  mdp.offsets_.push_back(0);
  for (const auto& r : rows_) {
    auto sorted = r;
    std::sort(sorted.begin(), sorted.end(),
              [](const Transition& x, const Transition& y) { return x.next < y.next; });
    mdp.entries_.insert(mdp.entries_.end(), sorted.begin(), sorted.end());
    mdp.offsets_.push_back(mdp.entries_.size());
  }
  mdp.goal_mask_ = goal_mask_;
  for (StateId s = 0; s < num_states_; ++s) {
    if (goal_mask_[s]) mdp.goals_.push_back(s);
  }
  mdp.start_ = start_;
  return mdp;
}

double expected_cost(const SspMdp& mdp, StateId s, ActionId a) {
  double c = 0.0;
  for (const auto& t : mdp.outcomes(s, a)) c += t.prob * t.cost;
  return c;
}

// ---------------------------------------------------------------------------
// Policies

StochasticPolicy::StochasticPolicy(std::size_t num_states, std::size_t num_actions)
    : num_states_(num_states),
      num_actions_(num_actions),
      probs_(num_states * num_actions, num_actions ? 1.0 / static_cast<double>(num_actions) : 0.0) {}

StochasticPolicy::StochasticPolicy(std::size_t num_states, std::size_t num_actions,
                                   std::vector<double> probs)
    : num_states_(num_states), num_actions_(num_actions), probs_(std::move(probs)) {
  if (probs_.size() != num_states * num_actions) {
    throw UsageError("stochastic policy table has wrong size");
  }
}

std::span<const double> StochasticPolicy::row(StateId s) const {
  if (s >= num_states_) throw UsageError("state " + std::to_string(s) + " out of range");
  return {probs_.data() + s * num_actions_, num_actions_};
}

bool StochasticPolicy::is_normalized(double tol) const {
  for (StateId s = 0; s < num_states_; ++s) {
    double sum = 0.0;
    for (double p : row(s)) {
      if (!(p >= 0.0 && p <= 1.0)) return false;
      sum += p;
    }
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

StochasticPolicy as_stochastic(const DeterministicPolicy& policy, std::size_t num_actions) {
  std::vector<double> probs(policy.num_states() * num_actions, 0.0);
  for (StateId s = 0; s < policy.num_states(); ++s) {
    if (policy[s] >= num_actions) throw UsageError("policy action out of range");
    probs[s * num_actions + policy[s]] = 1.0;
  }
  return StochasticPolicy(policy.num_states(), num_actions, std::move(probs));
}

DeterministicPolicy greedy_extract(const StochasticPolicy& policy) {
  DeterministicPolicy out(policy.num_states(), 0);
  for (StateId s = 0; s < policy.num_states(); ++s) {
    auto r = policy.row(s);
    out[s] = static_cast<ActionId>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

ActionId greedy_action(std::span<const double> row) {
  if (row.empty()) throw UsageError("empty Q row");
  const double lo = *std::min_element(row.begin(), row.end());
  const double tol = kTieRelTol * std::abs(lo);
  for (ActionId a = 0; a < row.size(); ++a) {
    if (row[a] <= lo + tol) return a;
  }
  return 0;  // unreachable for finite rows
}

DeterministicPolicy greedy_policy(const QFunction& q) {
  DeterministicPolicy out(q.num_states(), 0);
  for (StateId s = 0; s < q.num_states(); ++s) out[s] = greedy_action(q.row(s));
  return out;
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::has(ViolationKind kind) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.kind == kind; });
}

std::vector<std::size_t> goal_distances(const SspMdp& mdp) {
  const std::size_t n = mdp.num_states();
  std::vector<std::vector<StateId>> preds(n);
  for (StateId s = 0; s < n; ++s) {
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      for (const auto& t : mdp.outcomes(s, a)) {
        if (t.prob > 0.0 && t.next != s) preds[t.next].push_back(s);
      }
    }
  }
  std::vector<std::size_t> dist(n, std::numeric_limits<std::size_t>::max());
  std::deque<StateId> queue;
  for (StateId g : mdp.goals()) {
    dist[g] = 0;
    queue.push_back(g);
  }
  while (!queue.empty()) {
    const StateId j = queue.front();
    queue.pop_front();
    for (StateId i : preds[j]) {
      if (dist[i] == std::numeric_limits<std::size_t>::max()) {
        dist[i] = dist[j] + 1;
        queue.push_back(i);
      }
    }
  }
  return dist;
}

std::vector<char> goal_reachable_any_action(const SspMdp& mdp) {
  const auto dist = goal_distances(mdp);
  std::vector<char> out(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) {
    out[i] = dist[i] != std::numeric_limits<std::size_t>::max();
  }
  return out;
}

ValidationReport validate(const SspMdp& mdp) {
  ValidationReport report;
  auto add = [&](ViolationKind kind, std::optional<StateId> s, std::optional<ActionId> a,
                 std::optional<StateId> next, std::string msg) {
    report.violations.push_back({kind, s, a, next, std::move(msg)});
  };

  if (mdp.goals().empty()) add(ViolationKind::kNoGoal, {}, {}, {}, "no goal state");
  if (mdp.start() && *mdp.start() >= mdp.num_states()) {
    add(ViolationKind::kBadStart, mdp.start(), {}, {}, "start state out of range");
  }

  for (StateId s = 0; s < mdp.num_states(); ++s) {
    const bool goal = mdp.is_goal(s);
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      double sum = 0.0;
      bool self_loop_ok = false;
      for (const auto& t : mdp.outcomes(s, a)) {
        sum += t.prob;
        if (!(t.prob >= 0.0 && t.prob <= 1.0)) {
          add(ViolationKind::kProbabilityRange, s, a, t.next,
              "probability " + std::to_string(t.prob) + " out of range at " +
                  triple(s, a, t.next));
        }
        if (!(std::isfinite(t.cost) && t.cost >= 0.0)) {
          add(ViolationKind::kCostRange, s, a, t.next,
              "cost " + std::to_string(t.cost) + " is negative or not finite at " +
                  triple(s, a, t.next));
          continue;
        }
        if (goal) {
          if (t.next == s && t.prob == 1.0) self_loop_ok = true;
          if (t.cost != 0.0) {
            add(ViolationKind::kGoalCost, s, a, t.next,
                "goal " + std::to_string(s) + " has nonzero cost at " + triple(s, a, t.next));
          }
        } else if (t.prob > 0.0 && t.cost < kMinPositiveCost) {
          add(ViolationKind::kNonPositiveCost, s, a, t.next,
              "non-goal transition " + triple(s, a, t.next) + " has cost " +
                  std::to_string(t.cost) + " below the positive minimum");
        }
      }
      if (std::abs(sum - 1.0) > kRowSumTol || !std::isfinite(sum)) {
        std::ostringstream os;
        os.precision(12);
        os << "row sum " << sum << " != 1 at " << pair(s, a);
        add(ViolationKind::kRowSum, s, a, {}, os.str());
      }
      if (goal && (!self_loop_ok || mdp.outcomes(s, a).size() != 1)) {
        add(ViolationKind::kGoalNotAbsorbing, s, a, {},
            "goal " + std::to_string(s) + " is not absorbing under action " + std::to_string(a));
      }
    }
  }

  if (!mdp.goals().empty()) {
    const auto reach = goal_reachable_any_action(mdp);
    for (StateId s = 0; s < mdp.num_states(); ++s) {
      if (!reach[s]) {
        add(ViolationKind::kGoalUnreachable, s, {}, {},
            "no goal reachable from state " + std::to_string(s));
      }
    }
  }
  return report;
}

bool is_proper(const SspMdp& mdp, const DeterministicPolicy& policy) {
  const std::size_t n = mdp.num_states();
  if (policy.num_states() != n) throw UsageError("policy size does not match MDP");
  std::vector<std::vector<StateId>> preds(n);
  for (StateId s = 0; s < n; ++s) {
    if (mdp.is_goal(s)) continue;
    for (const auto& t : mdp.outcomes(s, policy[s])) {
      if (t.prob > 0.0) preds[t.next].push_back(s);
    }
  }
  std::vector<char> seen(n, 0);
  std::deque<StateId> queue;
  for (StateId g : mdp.goals()) {
    seen[g] = 1;
    queue.push_back(g);
  }
  std::size_t count = queue.size();
  while (!queue.empty()) {
    const StateId j = queue.front();
    queue.pop_front();
    for (StateId i : preds[j]) {
      if (!seen[i]) {
        seen[i] = 1;
        ++count;
        queue.push_back(i);
      }
    }
  }
  return count == n;
}

DeterministicPolicy backward_greedy_policy(const SspMdp& mdp) {
  const auto dist = goal_distances(mdp);
  DeterministicPolicy policy(mdp.num_states(), 0);
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (mdp.is_goal(s)) continue;
    double best = -1.0;
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      double closer = 0.0;
      for (const auto& t : mdp.outcomes(s, a)) {
        if (t.prob > 0.0 && dist[t.next] < dist[s]) closer += t.prob;
      }
      if (closer > best) {
        best = closer;
        policy[s] = a;
      }
    }
  }
  return policy;
}

}  // namespace ssp
