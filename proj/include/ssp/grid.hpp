#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ssp/mdp.hpp"

namespace ssp {

struct Cell {
  std::size_t row = 0;
  std::size_t col = 0;

  friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// Grid-world actions, in action-index order.
enum class Move : ActionId { kNorth = 0, kSouth = 1, kEast = 2, kWest = 3 };
inline constexpr std::size_t kNumMoves = 4;

struct GridSpec {
  std::size_t width = 0;
  std::size_t height = 0;
  std::set<Cell> obstacles;
  Cell start;
  std::set<Cell> goals;
  double p_slip = 0.0;
  double step_cost = 1.0;
};

/// Throws GridSpecError describing the first broken constraint.
void check_grid_spec(const GridSpec& spec);

/// Maps free cells to dense row-major state indices.
class GridIndex {
 public:
  explicit GridIndex(const GridSpec& spec);

  std::size_t num_states() const noexcept { return cells_.size(); }
  std::optional<StateId> state_of(Cell c) const;
  Cell cell_of(StateId s) const { return cells_.at(s); }

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<Cell> cells_;
  std::vector<std::optional<StateId>> lookup_;
};

/// One state per free cell, four moves. The intended move succeeds with
/// probability 1 - p_slip and each perpendicular move takes p_slip / 2;
/// moves into walls or obstacles stay put. Every non-goal transition costs
/// step_cost; goals are absorbing at zero cost. Throws GridSpecError for an
/// invalid spec or when some free cell cannot reach a goal.
SspMdp grid_to_mdp(const GridSpec& spec);

/// ASCII rows of '.', '#', 'S', 'G'. Row 0 is the first line.
GridSpec parse_grid_ascii(std::string_view text, double p_slip, double step_cost);
std::string write_grid_ascii(const GridSpec& spec);

}  // namespace ssp
