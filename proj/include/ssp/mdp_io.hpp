#pragma once

#include <string>
#include <string_view>

#include "ssp/mdp.hpp"

namespace ssp {

/// Parses the line-oriented MDP text format:
///
///   states N
///   actions M
///   goal i j ...
///   start i
///   t s a s' prob
///   c s a s' cost
///
/// '#' starts a comment. A transition without a `c` line costs 0, which is
/// only legal out of a goal. The result is validated; any violation throws
/// ParseError carrying the line of the offending entry.
SspMdp parse_mdp(std::string_view text);

/// Canonical text form. Numbers are written in shortest round-trip form, so
/// parse_mdp(write_mdp(m)) == m.
std::string write_mdp(const SspMdp& mdp);

/// Shortest decimal form that reads back to the same double.
std::string format_double(double x);

}  // namespace ssp
