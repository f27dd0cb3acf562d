#include "ssp/random_mdp.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "ssp/errors.hpp"

namespace ssp {

namespace {

std::size_t uniform_index(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// (0, 1]
double open_unit(std::mt19937_64& rng) {
  return 1.0 - std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

struct Row {
  std::vector<StateId> next;
  std::vector<double> weight;
  std::vector<double> cost;
};

}  // namespace

std::uint64_t split_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + (stream + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

SspMdp random_mdp(const RandomMdpSpec& spec, std::mt19937_64& rng) {
  if (spec.min_states < 2 || spec.max_states < spec.min_states || spec.min_actions < 1 ||
      spec.max_actions < spec.min_actions || spec.max_successors < 1 || !(spec.max_cost > 0.0)) {
    throw UsageError("invalid random MDP spec");
  }
  const std::size_t n = uniform_index(rng, spec.min_states, spec.max_states);
  const std::size_t m = uniform_index(rng, spec.min_actions, spec.max_actions);

  std::vector<StateId> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t num_goals = uniform_index(rng, 1, std::max<std::size_t>(1, n / 5));
  std::vector<char> goal(n, 0);
  for (std::size_t k = 0; k < num_goals; ++k) goal[order[k]] = 1;

  std::vector<Row> rows(n * m);
  for (StateId s = 0; s < n; ++s) {
    if (goal[s]) continue;
    for (ActionId a = 0; a < m; ++a) {
      Row& row = rows[s * m + a];
      const std::size_t k = uniform_index(rng, 1, std::min(spec.max_successors, n));
      std::vector<StateId> pool(n);
      std::iota(pool.begin(), pool.end(), 0);
      std::shuffle(pool.begin(), pool.end(), rng);
      for (std::size_t j = 0; j < k; ++j) {
        row.next.push_back(pool[j]);
        row.weight.push_back(open_unit(rng));
        row.cost.push_back(spec.max_cost * open_unit(rng));
      }
    }
  }

  // Splice an edge into a goal-reaching state until every state reaches a goal.
  auto reaching = [&] {
    std::vector<char> reach(goal);
    bool grew = true;
    while (grew) {
      grew = false;
      for (StateId s = 0; s < n; ++s) {
        if (reach[s]) continue;
        for (ActionId a = 0; a < m && !reach[s]; ++a) {
          for (StateId j : rows[s * m + a].next) {
            if (reach[j]) {
              reach[s] = 1;
              grew = true;
              break;
            }
          }
        }
      }
    }
    return reach;
  };
  for (auto reach = reaching(); std::find(reach.begin(), reach.end(), 0) != reach.end();
       reach = reaching()) {
    std::vector<StateId> stuck, good;
    for (StateId s = 0; s < n; ++s) (reach[s] ? good : stuck).push_back(s);
    const StateId s = stuck[uniform_index(rng, 0, stuck.size() - 1)];
    const StateId target = good[uniform_index(rng, 0, good.size() - 1)];
    Row& row = rows[s * m + uniform_index(rng, 0, m - 1)];
    auto it = std::find(row.next.begin(), row.next.end(), target);
    if (it != row.next.end()) continue;
    row.next.push_back(target);
    row.weight.push_back(open_unit(rng));
    row.cost.push_back(spec.max_cost * open_unit(rng));
  }

  SspMdpBuilder builder(n, m);
  for (StateId s = 0; s < n; ++s) {
    if (goal[s]) {
      builder.add_absorbing_goal(s);
      continue;
    }
    for (ActionId a = 0; a < m; ++a) {
      const Row& row = rows[s * m + a];
      const double total = std::accumulate(row.weight.begin(), row.weight.end(), 0.0);
      for (std::size_t j = 0; j < row.next.size(); ++j) {
        builder.add(s, a, row.next[j], row.weight[j] / total, row.cost[j]);
      }
    }
  }
  return builder.build();
}

DeterministicPolicy random_proper_policy(const SspMdp& mdp, std::mt19937_64& rng) {
  const std::size_t n = mdp.num_states();
  const std::size_t m = mdp.num_actions();
  for (int attempt = 0; attempt < 20; ++attempt) {
    DeterministicPolicy p(n, 0);
    for (StateId s = 0; s < n; ++s) p[s] = uniform_index(rng, 0, m - 1);
    if (is_proper(mdp, p)) return p;
  }
  // Every state has at least one action that moves closer to a goal with
  // positive probability; choosing any of them yields a proper policy.
  const auto dist = goal_distances(mdp);
  DeterministicPolicy p(n, 0);
  for (StateId s = 0; s < n; ++s) {
    if (mdp.is_goal(s)) continue;
    std::vector<ActionId> closer;
    for (ActionId a = 0; a < m; ++a) {
      for (const auto& t : mdp.outcomes(s, a)) {
        if (t.prob > 0.0 && dist[t.next] < dist[s]) {
          closer.push_back(a);
          break;
        }
      }
    }
    if (closer.empty()) throw UsageError("state cannot reach a goal; no proper policy");
    p[s] = closer[uniform_index(rng, 0, closer.size() - 1)];
  }
  return p;
}

}  // namespace ssp
