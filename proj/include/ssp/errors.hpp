#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ssp {

/// Caller passed an out-of-range index or inconsistent arguments.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Policy evaluation or value iteration failed to settle; the usual cause is
/// an improper policy whose expected cost is infinite.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// All expected costs are equal, so costs cannot be mapped onto [0, 1].
class DegenerateMdpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The greedy improvement step revisited an earlier policy that was not a
/// fixed point.
class PolicyCycleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No goal is reachable in a deterministic planning graph.
class PlanningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid grid description.
class GridSpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed MDP text. `line()` is 1-based, 0 when the problem is not tied
/// to a single line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace ssp
