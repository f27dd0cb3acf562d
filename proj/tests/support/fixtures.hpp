#pragma once

// Small hand-solvable MDPs shared by the test suites.

#include "ssp/grid.hpp"
#include "ssp/mdp.hpp"

namespace ssp::testing {

// 0 --(cost 1)--> 1 (goal), one action.
inline SspMdp chain2() {
  return SspMdpBuilder(2, 1).add(0, 0, 1, 1.0, 1.0).add_absorbing_goal(1).set_start(0).build();
}

// State 0 reaches the goal or stays put with probability 1/2 each; cost 1.
inline SspMdp slip_chain() {
  return SspMdpBuilder(2, 1)
      .add(0, 0, 0, 0.5, 1.0)
      .add(0, 0, 1, 0.5, 1.0)
      .add_absorbing_goal(1)
      .set_start(0)
      .build();
}

// Action 0: cost 3, straight to the goal. Action 1: cost 1, reaches the
// goal or stays with probability 1/2 each. Optimal: action 1, V(0) = 2.
inline SspMdp two_action() {
  return SspMdpBuilder(2, 2)
      .add(0, 0, 1, 1.0, 3.0)
      .add(0, 1, 0, 0.5, 1.0)
      .add(0, 1, 1, 0.5, 1.0)
      .add_absorbing_goal(1)
      .set_start(0)
      .build();
}

inline GridSpec grid4x4(double p_slip) {
  GridSpec spec;
  spec.width = 4;
  spec.height = 4;
  spec.start = {0, 0};
  spec.goals = {{3, 3}};
  spec.p_slip = p_slip;
  spec.step_cost = 1.0;
  return spec;
}

}  // namespace ssp::testing
