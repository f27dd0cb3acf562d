#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

#include "ssp/mdp.hpp"

namespace ssp {

/// Shape of a randomly generated SSP MDP.
struct RandomMdpSpec {
  std::size_t min_states = 2;
  std::size_t max_states = 20;
  std::size_t min_actions = 1;
  std::size_t max_actions = 4;
  std::size_t max_successors = 3;
  double max_cost = 10.0;
};

/// Random valid SSP MDP: sparse rows with 1..max_successors outcomes, costs
/// drawn from (0, max_cost], between one and |S|/5 absorbing goals, and
/// extra edges spliced in until every state can reach a goal. Passes
/// validate() by construction.
SspMdp random_mdp(const RandomMdpSpec& spec, std::mt19937_64& rng);

/// Random proper deterministic policy. Tries uniformly random policies
/// first and falls back to a random choice among goal-ward actions.
DeterministicPolicy random_proper_policy(const SspMdp& mdp, std::mt19937_64& rng);

/// SplitMix64 finaliser; used to derive independent per-stream seeds.
std::uint64_t split_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace ssp
