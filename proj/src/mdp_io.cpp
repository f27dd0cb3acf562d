#include "ssp/mdp_io.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>
#include <vector>

#include "ssp/errors.hpp"

namespace ssp {

namespace {

using Triple = std::tuple<StateId, ActionId, StateId>;

std::string at_line(const std::string& msg, std::size_t line) {
  return msg + " at line " + std::to_string(line);
}

std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::size_t parse_index(std::string_view tok, std::size_t line) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    throw ParseError(line, at_line("expected a non-negative integer, got '" + std::string(tok) + "'", line));
  }
  return v;
}

double parse_real(std::string_view tok, std::size_t line) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    throw ParseError(line, at_line("expected a number, got '" + std::string(tok) + "'", line));
  }
  return v;
}

struct Entry {
  double prob = 0.0;
  double cost = 0.0;
  std::size_t t_line = 0;
  std::size_t c_line = 0;
};

}  // namespace

std::string format_double(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, p);
}

SspMdp parse_mdp(std::string_view text) {
  std::optional<std::size_t> num_states;
  std::optional<std::size_t> num_actions;
  std::map<StateId, std::size_t> goal_lines;
  std::optional<StateId> start;
  std::size_t start_line = 0;
  std::map<Triple, Entry> entries;

  auto need_dims = [&](std::size_t line) {
    if (!num_states || !num_actions) {
      throw ParseError(line, at_line("'states' and 'actions' must precede this entry", line));
    }
  };
  auto check_state = [&](StateId s, std::size_t line) {
    if (s >= *num_states) {
      throw ParseError(line, at_line("state " + std::to_string(s) + " out of range", line));
    }
  };
  auto check_action = [&](ActionId a, std::size_t line) {
    if (a >= *num_actions) {
      throw ParseError(line, at_line("action " + std::to_string(a) + " out of range", line));
    }
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = tokenize(line);
    if (tok.empty()) continue;
    const std::string_view key = tok[0];
    auto expect_args = [&](std::size_t n) {
      if (tok.size() != n + 1) {
        throw ParseError(line_no, at_line("'" + std::string(key) + "' expects " +
                                              std::to_string(n) + " argument(s)",
                                          line_no));
      }
    };

    if (key == "states" || key == "actions") {
      expect_args(1);
      auto& slot = key == "states" ? num_states : num_actions;
      if (slot) throw ParseError(line_no, at_line("'" + std::string(key) + "' declared twice", line_no));
      slot = parse_index(tok[1], line_no);
      if (*slot == 0) throw ParseError(line_no, at_line(std::string(key) + " must be positive", line_no));
    } else if (key == "goal") {
      need_dims(line_no);
      if (tok.size() < 2) throw ParseError(line_no, at_line("'goal' needs at least one state", line_no));
      for (std::size_t k = 1; k < tok.size(); ++k) {
        const StateId g = parse_index(tok[k], line_no);
        check_state(g, line_no);
        goal_lines.emplace(g, line_no);
      }
    } else if (key == "start") {
      need_dims(line_no);
      expect_args(1);
      start = parse_index(tok[1], line_no);
      check_state(*start, line_no);
      start_line = line_no;
    } else if (key == "t" || key == "c") {
      need_dims(line_no);
      expect_args(4);
      const StateId s = parse_index(tok[1], line_no);
      const ActionId a = parse_index(tok[2], line_no);
      const StateId next = parse_index(tok[3], line_no);
      check_state(s, line_no);
      check_action(a, line_no);
      check_state(next, line_no);
      const double value = parse_real(tok[4], line_no);
      Entry& e = entries[{s, a, next}];
      if (key == "t") {
        if (e.t_line) {
          throw ParseError(line_no, at_line("duplicate transition (" + std::to_string(s) + "," +
                                                std::to_string(a) + "," + std::to_string(next) +
                                                "), first given on line " + std::to_string(e.t_line),
                                            line_no));
        }
        if (!(value >= 0.0 && value <= 1.0)) {
          throw ParseError(line_no, at_line("probability " + std::string(tok[4]) + " out of range", line_no));
        }
        e.prob = value;
        e.t_line = line_no;
      } else {
        if (e.c_line) {
          throw ParseError(line_no, at_line("duplicate cost entry, first given on line " +
                                                std::to_string(e.c_line),
                                            line_no));
        }
        if (!(value >= 0.0) || !std::isfinite(value)) {
          throw ParseError(line_no, at_line("cost " + std::string(tok[4]) + " must be finite and non-negative", line_no));
        }
        e.cost = value;
        e.c_line = line_no;
      }
    } else {
      throw ParseError(line_no, at_line("unknown keyword '" + std::string(key) + "'", line_no));
    }
  }

  if (!num_states || !num_actions) throw ParseError(0, "missing 'states' or 'actions' declaration");

  SspMdpBuilder builder(*num_states, *num_actions);
  std::map<std::pair<StateId, ActionId>, std::size_t> row_line;
  for (const auto& [key, e] : entries) {
    const auto& [s, a, next] = key;
    if (!e.t_line) {
      throw ParseError(e.c_line, at_line("cost given for a transition with no 't' entry", e.c_line));
    }
    builder.add(s, a, next, e.prob, e.cost);
    auto [it, fresh] = row_line.emplace(std::pair{s, a}, e.t_line);
    if (!fresh) it->second = std::min(it->second, e.t_line);
  }
  for (const auto& [g, line] : goal_lines) builder.mark_goal(g);
  if (start) builder.set_start(*start);
  SspMdp mdp = builder.build();

  const ValidationReport report = validate(mdp);
  if (report.ok()) return mdp;

  auto line_of = [&](const Violation& v) -> std::size_t {
    if (v.kind == ViolationKind::kBadStart) return start_line;
    if (v.state && (v.kind == ViolationKind::kGoalNotAbsorbing)) return goal_lines.at(*v.state);
    if (v.state && v.action && v.next) {
      const Entry& e = entries.at({*v.state, *v.action, *v.next});
      return (v.kind == ViolationKind::kGoalCost && e.c_line) ? e.c_line : e.t_line;
    }
    if (v.state && v.action) {
      if (auto it = row_line.find({*v.state, *v.action}); it != row_line.end()) return it->second;
    }
    if (v.state) {
      if (auto it = goal_lines.find(*v.state); it != goal_lines.end()) return it->second;
    }
    return 0;
  };
  std::ostringstream msg;
  std::size_t first_line = 0;
  for (std::size_t k = 0; k < report.violations.size(); ++k) {
    const auto& v = report.violations[k];
    const std::size_t line = line_of(v);
    if (k == 0) first_line = line;
    if (k) msg << "\n";
    msg << (line ? at_line(v.message, line) : v.message);
  }
  throw ParseError(first_line, msg.str());
}

std::string write_mdp(const SspMdp& mdp) {
  std::ostringstream out;
  out << "states " << mdp.num_states() << "\n";
  out << "actions " << mdp.num_actions() << "\n";
  if (!mdp.goals().empty()) {
    out << "goal";
    for (StateId g : mdp.goals()) out << " " << g;
    out << "\n";
  }
  if (mdp.start()) out << "start " << *mdp.start() << "\n";
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      for (const auto& t : mdp.outcomes(s, a)) {
        out << "t " << s << " " << a << " " << t.next << " " << format_double(t.prob) << "\n";
        if (t.cost != 0.0) {
          out << "c " << s << " " << a << " " << t.next << " " << format_double(t.cost) << "\n";
        }
      }
    }
  }
  return out.str();
}

}  // namespace ssp
