#include "ssp/grid.hpp"

#include <array>
#include <map>
#include <sstream>

#include "ssp/errors.hpp"

namespace ssp {

namespace {

std::string cell_str(Cell c) {
  return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")";
}

bool in_bounds(const GridSpec& spec, Cell c) { return c.row < spec.height && c.col < spec.width; }

// Destination of a move, staying put at walls and obstacles.
Cell step(const GridSpec& spec, Cell c, Move m) {
  Cell to = c;
  switch (m) {
    case Move::kNorth:
      if (c.row == 0) return c;
      to.row = c.row - 1;
      break;
    case Move::kSouth:
      to.row = c.row + 1;
      break;
    case Move::kEast:
      to.col = c.col + 1;
      break;
    case Move::kWest:
      if (c.col == 0) return c;
      to.col = c.col - 1;
      break;
  }
  if (!in_bounds(spec, to) || spec.obstacles.count(to)) return c;
  return to;
}

std::array<Move, 2> perpendicular(Move m) {
  if (m == Move::kNorth || m == Move::kSouth) return {Move::kEast, Move::kWest};
  return {Move::kNorth, Move::kSouth};
}

}  // namespace

void check_grid_spec(const GridSpec& spec) {
  if (spec.width == 0 || spec.height == 0) throw GridSpecError("grid must be non-empty");
  if (!(spec.p_slip >= 0.0 && spec.p_slip < 1.0)) {
    throw GridSpecError("slip probability must lie in [0, 1)");
  }
  if (!(spec.step_cost > 0.0)) throw GridSpecError("step cost must be positive");
  if (spec.goals.empty()) throw GridSpecError("at least one goal cell is required");
  for (Cell o : spec.obstacles) {
    if (!in_bounds(spec, o)) throw GridSpecError("obstacle " + cell_str(o) + " out of bounds");
  }
  if (!in_bounds(spec, spec.start)) {
    throw GridSpecError("start " + cell_str(spec.start) + " out of bounds");
  }
  if (spec.obstacles.count(spec.start)) {
    throw GridSpecError("start " + cell_str(spec.start) + " is an obstacle");
  }
  for (Cell g : spec.goals) {
    if (!in_bounds(spec, g)) throw GridSpecError("goal " + cell_str(g) + " out of bounds");
    if (spec.obstacles.count(g)) throw GridSpecError("goal " + cell_str(g) + " is an obstacle");
  }
}

GridIndex::GridIndex(const GridSpec& spec)
    : width_(spec.width), height_(spec.height), lookup_(spec.width * spec.height) {
  for (std::size_t r = 0; r < height_; ++r) {
    for (std::size_t c = 0; c < width_; ++c) {
      if (spec.obstacles.count({r, c})) continue;
      lookup_[r * width_ + c] = cells_.size();
      cells_.push_back({r, c});
    }
  }
}

std::optional<StateId> GridIndex::state_of(Cell c) const {
  if (c.row >= height_ || c.col >= width_) return std::nullopt;
  return lookup_[c.row * width_ + c.col];
}

SspMdp grid_to_mdp(const GridSpec& spec) {
  check_grid_spec(spec);
  const GridIndex index(spec);
  SspMdpBuilder builder(index.num_states(), kNumMoves);

  for (StateId s = 0; s < index.num_states(); ++s) {
    const Cell here = index.cell_of(s);
    if (spec.goals.count(here)) {
      builder.add_absorbing_goal(s);
      continue;
    }
    for (ActionId a = 0; a < kNumMoves; ++a) {
      const Move m = static_cast<Move>(a);
      std::map<StateId, double> successors;
      successors[*index.state_of(step(spec, here, m))] += 1.0 - spec.p_slip;
      if (spec.p_slip > 0.0) {
        for (Move side : perpendicular(m)) {
          successors[*index.state_of(step(spec, here, side))] += spec.p_slip / 2.0;
        }
      }
      for (const auto& [next, p] : successors) builder.add(s, a, next, p, spec.step_cost);
    }
  }
  builder.set_start(*index.state_of(spec.start));
  SspMdp mdp = builder.build();

  const auto reach = goal_reachable_any_action(mdp);
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (!reach[s]) {
      const bool is_start = s == *mdp.start();
      throw GridSpecError(std::string(is_start ? "no goal reachable from start " : "no goal reachable from cell ") +
                          cell_str(index.cell_of(s)));
    }
  }
  return mdp;
}

GridSpec parse_grid_ascii(std::string_view text, double p_slip, double step_cost) {
  GridSpec spec;
  spec.p_slip = p_slip;
  spec.step_cost = step_cost;
  std::vector<std::string> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(line);
  }
  if (rows.empty()) throw GridSpecError("empty grid");
  spec.height = rows.size();
  spec.width = rows.front().size();
  bool have_start = false;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != spec.width) {
      throw GridSpecError("grid row " + std::to_string(r) + " has a different width");
    }
    for (std::size_t c = 0; c < spec.width; ++c) {
      switch (rows[r][c]) {
        case '.':
          break;
        case '#':
          spec.obstacles.insert({r, c});
          break;
        case 'S':
          if (have_start) throw GridSpecError("more than one start cell");
          spec.start = {r, c};
          have_start = true;
          break;
        case 'G':
          spec.goals.insert({r, c});
          break;
        default:
          throw GridSpecError("unexpected character '" + std::string(1, rows[r][c]) +
                              "' at " + cell_str({r, c}));
      }
    }
  }
  if (!have_start) throw GridSpecError("grid has no start cell");
  check_grid_spec(spec);
  return spec;
}

std::string write_grid_ascii(const GridSpec& spec) {
  std::string out;
  for (std::size_t r = 0; r < spec.height; ++r) {
    for (std::size_t c = 0; c < spec.width; ++c) {
      const Cell cell{r, c};
      char ch = '.';
      if (spec.obstacles.count(cell)) ch = '#';
      else if (spec.goals.count(cell)) ch = 'G';
      else if (spec.start == cell) ch = 'S';
      out.push_back(ch);
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace ssp
