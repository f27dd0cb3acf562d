#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "ssp/dp_solver.hpp"
#include "ssp/errors.hpp"
#include "ssp/grid.hpp"
#include "ssp/harness.hpp"
#include "ssp/inference.hpp"
#include "ssp/mdp_io.hpp"

namespace ssp::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

/// Bad flags, unreadable files and the like; maps to kInputError.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Solver did not settle on a policy; maps to kDivergence.
struct NonConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path resolve_output(const std::string& path) {
  fs::path p(path);
  if (p.is_relative()) {
    if (const char* dir = std::getenv(kOutputDirEnv); dir != nullptr && *dir != '\0') return fs::path(dir) / p;
  }
  return p;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text)) throw InputError("cannot write " + path.string());
}

/// Writes to --out when given, otherwise to stdout.
void emit(const std::string& out_path, const std::string& text, std::ostream& out) {
  if (out_path.empty()) out << text;
  else write_file(resolve_output(out_path), text);
}

template <class T>
T parse_number(std::string_view text, const std::string& what) {
  T value{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw InputError("bad " + what + ": '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> parts;
  std::size_t from = 0;
  while (true) {
    const auto at = text.find(sep, from);
    parts.emplace_back(text.substr(from, at - from));
    if (at == std::string_view::npos) return parts;
    from = at + 1;
  }
}

Cell parse_cell(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 2) throw InputError("cell must be ROW,COL: '" + text + "'");
  return {parse_number<std::size_t>(parts[0], "row"), parse_number<std::size_t>(parts[1], "column")};
}

SspMdp load_mdp(const std::string& path) { return parse_mdp(read_file(path)); }

StateId start_state(const SspMdp& mdp, const std::optional<StateId>& flag) {
  const StateId s = flag ? *flag : mdp.start().value_or(0);
  if (s >= mdp.num_states()) throw InputError("start state " + std::to_string(s) + " out of range");
  return s;
}

TimePrior make_prior(const std::string& kind, const std::optional<double>& gamma, std::size_t t_max) {
  if (t_max < 1) throw InputError("--tmax must be at least 1");
  if (kind == "flat") {
    if (gamma) throw InputError("--gamma only applies to --prior discounted");
    return TimePrior::flat(t_max);
  }
  if (!gamma) throw InputError("--prior discounted requires --gamma");
  if (!(*gamma > 0.0 && *gamma < 1.0)) throw InputError("--gamma must lie in (0,1)");
  return TimePrior::discounted(*gamma, t_max);
}

// ---------------------------------------------------------------- gen-grid

struct GenGridArgs {
  std::string size;
  double slip = 0.0;
  double step_cost = 1.0;
  std::string start = "0,0";
  std::vector<std::string> goals;
  std::vector<std::string> obstacles;
  std::string from_ascii;
  std::string out = "grid.mdp";
  std::string ascii_out;
};

int gen_grid(const GenGridArgs& a, std::ostream& out) {
  GridSpec spec;
  if (!a.from_ascii.empty()) {
    if (!a.size.empty() || !a.goals.empty() || !a.obstacles.empty()) {
      throw InputError("--from-ascii excludes --size, --goal and --obstacle");
    }
    spec = parse_grid_ascii(read_file(a.from_ascii), a.slip, a.step_cost);
  } else {
    if (a.size.empty()) throw InputError("--size WxH or --from-ascii is required");
    const auto dims = split(a.size, 'x');
    if (dims.size() != 2) throw InputError("--size must be WxH: '" + a.size + "'");
    spec.width = parse_number<std::size_t>(dims[0], "width");
    spec.height = parse_number<std::size_t>(dims[1], "height");
    spec.start = parse_cell(a.start);
    for (const auto& g : a.goals) spec.goals.insert(parse_cell(g));
    for (const auto& o : a.obstacles) spec.obstacles.insert(parse_cell(o));
    spec.p_slip = a.slip;
    spec.step_cost = a.step_cost;
  }
  const SspMdp mdp = grid_to_mdp(spec);

  const fs::path mdp_path = resolve_output(a.out);
  fs::path ascii_path = a.ascii_out.empty() ? fs::path(a.out).replace_extension(".txt") : fs::path(a.ascii_out);
  ascii_path = resolve_output(ascii_path.string());
  if (ascii_path == mdp_path) throw InputError("MDP and grid outputs must differ");
  write_file(mdp_path, write_mdp(mdp));
  write_file(ascii_path, write_grid_ascii(spec));
  out << "wrote " << mdp_path.string() << " (" << mdp.num_states() << " states) and " << ascii_path.string()
      << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------- validate

int validate_cmd(const std::string& input, std::ostream& out) {
  const SspMdp mdp = load_mdp(input);
  out << "OK " << mdp.num_states() << " states, " << mdp.num_actions() << " actions, " << mdp.goals().size()
      << " goals, " << mdp.num_entries() << " transitions\n";
  return kSuccess;
}

// ----------------------------------------------------------------- convert

int convert(const std::string& input, const std::string& format, const std::string& out_path, std::ostream& out) {
  const SspMdp mdp = load_mdp(input);
  if (format == "text") {
    emit(out_path, write_mdp(mdp), out);
    return kSuccess;
  }
  ordered_json j;
  j["states"] = mdp.num_states();
  j["actions"] = mdp.num_actions();
  j["goals"] = mdp.goals();
  j["start"] = mdp.start() ? ordered_json(*mdp.start()) : ordered_json(nullptr);
  ordered_json rows = ordered_json::array();
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      for (const auto& t : mdp.outcomes(s, a)) {
        rows.push_back({{"state", s}, {"action", a}, {"next", t.next}, {"prob", t.prob}, {"cost", t.cost}});
      }
    }
  }
  j["transitions"] = std::move(rows);
  emit(out_path, j.dump(2) + "\n", out);
  return kSuccess;
}

// ------------------------------------------------------------------- solve

struct SolveArgs {
  std::string input;
  std::string solver = "pi";
  double eps = 1e-10;
  std::string eval = "eps";
  std::size_t sweeps = 1;
  std::size_t sweep_cap = 1'000'000;
  std::optional<std::size_t> t_max;
  std::string prior = "flat";
  std::optional<double> gamma;
  std::string out;
};

ordered_json rounds_json(const SolveReport& r) {
  ordered_json rounds = ordered_json::array();
  for (std::size_t k = 0; k < r.rounds.size(); ++k) {
    rounds.push_back({{"round", k + 1}, {"sweeps", r.rounds[k].sweeps}, {"changed_states", r.rounds[k].changed_states}});
  }
  return rounds;
}

ordered_json policy_json(const DeterministicPolicy& policy, const ValueFunction& values) {
  ordered_json rows = ordered_json::array();
  for (StateId s = 0; s < policy.num_states(); ++s) {
    rows.push_back({{"state", s}, {"action", policy[s]}, {"value", values[s]}});
  }
  return rows;
}

int solve(const SolveArgs& a, std::ostream& out) {
  if (!(a.eps > 0.0)) throw InputError("--eps must be positive");
  const SspMdp mdp = load_mdp(a.input);

  ordered_json j;
  j["solver"] = a.solver;
  j["states"] = mdp.num_states();
  j["actions"] = mdp.num_actions();
  bool converged = true;

  if (a.solver == "pi") {
    EvalTermination term = EpsilonGreedy{a.eps, a.sweep_cap};
    if (a.eval == "truncated") {
      if (a.sweeps < 1) throw InputError("--sweeps must be at least 1");
      term = Truncated{a.sweeps};
    }
    const SolveReport r = policy_iteration(mdp, std::nullopt, term);
    converged = r.converged;
    j["evaluation"] = a.eval == "truncated" ? ordered_json{{"kind", "truncated"}, {"sweeps", a.sweeps}}
                                            : ordered_json{{"kind", "eps"}, {"epsilon", a.eps}};
    j["converged"] = r.converged;
    j["improvement_rounds"] = r.improvement_rounds;
    j["sweeps_total"] = r.sweeps_total;
    j["rounds"] = rounds_json(r);
    j["policy"] = policy_json(r.policy, r.values);
  } else if (a.solver == "vi") {
    const auto r = value_iteration(mdp, a.eps, a.sweep_cap);
    j["converged"] = true;
    j["improvement_rounds"] = 0;
    j["sweeps_total"] = r.sweeps;
    j["rounds"] = ordered_json::array({{{"round", 1}, {"sweeps", r.sweeps}, {"changed_states", mdp.num_states()}}});
    j["policy"] = policy_json(r.policy, r.values);
  } else {
    const TimePrior prior = make_prior(a.prior, a.gamma, a.t_max.value_or(2 * mdp.num_states()));
    const SolveReport r = em_solve(mdp, prior);
    converged = r.converged;
    j["prior"] = {{"kind", a.prior}, {"t_max", prior.t_max()}};
    if (a.gamma) j["prior"]["gamma"] = *a.gamma;
    j["converged"] = r.converged;
    j["improvement_rounds"] = r.improvement_rounds;
    j["sweeps_total"] = r.sweeps_total;
    j["rounds"] = rounds_json(r);
    j["policy"] = policy_json(r.policy, r.values);
    // Messages of the returned policy, one row per τ.
    const auto e = e_step(mdp, scale_costs(mdp), as_stochastic(r.policy, mdp.num_actions()), prior);
    ordered_json trace = ordered_json::array();
    for (std::size_t tau = 0; tau <= prior.t_max(); ++tau) {
      const auto layer = e.betas.layer(tau);
      trace.push_back(std::vector<double>(layer.begin(), layer.end()));
    }
    j["beta_trace"] = std::move(trace);
  }
  emit(a.out, j.dump(2) + "\n", out);
  if (!converged) throw NonConvergence("solver stopped on a policy cycle without converging");
  return kSuccess;
}

// ------------------------------------------------------ verify-equivalence

struct VerifyArgs {
  std::string input;
  std::optional<std::size_t> t_max;
  std::size_t max_rounds = 100;
  bool corrupt_beta = false;
  std::string out;
};

int verify_equivalence(const VerifyArgs& a, std::ostream& out) {
  const SspMdp mdp = load_mdp(a.input);
  const std::size_t t_max = a.t_max.value_or(2 * mdp.num_states());
  const TimePrior prior = make_prior("flat", std::nullopt, t_max);
  const ScaledCostModel scaled = scale_costs(mdp);
  const StateId s0 = start_state(mdp, std::nullopt);
  constexpr double kTolerance = 1e-9;

  std::ostringstream table;
  table << "# t_max " << t_max << ", start state " << s0 << "\n";
  table << "round,max_value_dev,policy_match,v_em_start,v_pe_start\n";

  DeterministicPolicy policy = backward_greedy_policy(mdp);
  std::set<std::vector<ActionId>> seen{policy.actions()};
  double worst = 0.0;
  bool ok = true;
  std::size_t round = 0;
  std::string ending = "converged";
  while (true) {
    ++round;
    EStepResult e = e_step(mdp, scaled, as_stochastic(policy, mdp.num_actions()), prior);
    if (a.corrupt_beta) {
      for (StateId s = 0; s < mdp.num_states(); ++s) {
        if (!mdp.is_goal(s)) e.betas(t_max, s) += 1e-3;
      }
    }
    const ValueFunction v_em = value_from_betas(e.betas, scaled, prior);
    const ValueFunction v_pe = policy_evaluation(mdp, policy, Truncated{t_max + 1});
    double dev = 0.0;
    for (StateId s = 0; s < mdp.num_states(); ++s) dev = std::max(dev, std::abs(v_em[s] - v_pe[s]));
    const DeterministicPolicy em_next = m_step_greedy(e.q_prob);
    const DeterministicPolicy pi_next =
        policy_improvement(compute_q(mdp, policy_evaluation(mdp, policy, Truncated{t_max})));
    const bool match = em_next == pi_next;
    worst = std::max(worst, dev);
    ok = ok && match && dev <= kTolerance;
    table << round << "," << format_double(dev) << "," << (match ? "yes" : "no") << "," << format_double(v_em[s0])
          << "," << format_double(v_pe[s0]) << "\n";
    if (!match) {
      ending = "policies diverged";
      break;
    }
    if (em_next == policy) break;
    if (!seen.insert(em_next.actions()).second) {
      ending = "both solvers entered the same policy cycle";
      break;
    }
    if (round >= a.max_rounds) {
      ending = "round limit reached";
      break;
    }
    policy = em_next;
  }
  table << (ok ? "PASS" : "FAIL") << " rounds=" << round << " max_value_dev=" << format_double(worst)
        << " tolerance=" << format_double(kTolerance) << " (" << ending << ")\n";
  emit(a.out, table.str(), out);
  return ok ? kSuccess : kVerificationFailure;
}

// ----------------------------------------------------------- compare-modes

struct CompareArgs {
  std::string input;
  std::string modes = "offline,replan,probplan,determinize";
  std::size_t n = 100;
  std::uint64_t seed = 1;
  std::size_t max_steps = 1000;
  std::optional<StateId> start;
  double eps = 1e-10;
  std::optional<std::size_t> t_max;
  std::string prior = "flat";
  std::optional<double> gamma;
  std::string event;
  std::size_t workers = 1;
  bool timing = false;
  std::string format = "csv";
  std::string out;
};

CostEvent parse_event(const std::string& text, std::size_t num_states) {
  const auto parts = split(text, ':');
  if (parts.size() != 3) throw InputError("--event must be STEP:MULTIPLIER:S1,S2,...");
  CostEvent ev;
  ev.step = parse_number<std::size_t>(parts[0], "event step");
  ev.multiplier = parse_number<double>(parts[1], "event multiplier");
  if (!(ev.multiplier > 0.0) || !std::isfinite(ev.multiplier)) throw InputError("event multiplier must be positive");
  for (const auto& s : split(parts[2], ',')) {
    const auto id = parse_number<StateId>(s, "event state");
    if (id >= num_states) throw InputError("event state " + s + " out of range");
    ev.states.push_back(id);
  }
  return ev;
}

int compare_modes(const CompareArgs& a, std::ostream& out) {
  const SspMdp mdp = load_mdp(a.input);
  const StateId s0 = start_state(mdp, a.start);
  if (a.n < 1) throw InputError("--n must be at least 1");
  if (a.max_steps < 1) throw InputError("--max-steps must be at least 1");
  if (!(a.eps > 0.0)) throw InputError("--eps must be positive");
  const std::size_t t_max = a.t_max.value_or(2 * mdp.num_states());
  make_prior(a.prior, a.gamma, t_max);  // flag check only

  std::vector<ExecutionMode> modes;
  for (const auto& name : split(a.modes, ',')) {
    if (name == "offline") {
      modes.emplace_back(OfflinePolicy{policy_iteration(mdp, std::nullopt, EpsilonGreedy{a.eps}).policy});
    } else if (name == "replan") {
      modes.emplace_back(ReplanPolicy{EpsilonGreedy{a.eps}});
    } else if (name == "probplan") {
      ProbabilisticPlan p;
      p.t_max = t_max;
      p.prior = a.prior == "flat" ? TimePrior::Kind::kFlat : TimePrior::Kind::kDiscounted;
      if (a.gamma) p.gamma = *a.gamma;
      modes.emplace_back(p);
    } else if (name == "determinize") {
      modes.emplace_back(DeterminizeReplan{});
    } else {
      throw InputError("unknown mode '" + name + "' (expected offline, replan, probplan, determinize)");
    }
  }

  EvaluateOptions opts;
  opts.simulation.max_steps = a.max_steps;
  if (!a.event.empty()) opts.simulation.event = parse_event(a.event, mdp.num_states());
  opts.workers = std::max<std::size_t>(1, a.workers);

  std::ostringstream csv;
  ordered_json rows = ordered_json::array();
  csv << "mode,mean_cost,std_error,goal_rate,mean_wallclock_per_decision\n";
  for (const auto& mode : modes) {
    const RolloutStats st = evaluate_mode(mdp, mode, s0, a.n, a.seed, opts);
    const double wall = a.timing ? st.mean_wallclock_per_decision.count() : 0.0;
    csv << mode_name(mode) << "," << format_double(st.mean_cost) << "," << format_double(st.std_error) << ","
        << format_double(st.goal_rate) << "," << format_double(wall) << "\n";
    rows.push_back({{"mode", mode_name(mode)},
                    {"n", st.n},
                    {"mean_cost", st.mean_cost},
                    {"std_error", st.std_error},
                    {"goal_rate", st.goal_rate},
                    {"mean_wallclock_per_decision", wall},
                    {"peak_table_entries", st.peak_table_entries}});
  }
  emit(a.out, a.format == "csv" ? csv.str() : rows.dump(2) + "\n", out);
  return kSuccess;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic shortest path toolkit: dynamic programming and EM planning"};
  app.require_subcommand(1);

  GenGridArgs gg;
  auto* gen = app.add_subcommand("gen-grid", "Generate a grid-world MDP file and its ASCII map");
  gen->add_option("--size", gg.size, "Grid size WxH");
  gen->add_option("--slip", gg.slip, "Slip probability")->capture_default_str();
  gen->add_option("--step-cost", gg.step_cost, "Cost of every move")->capture_default_str();
  gen->add_option("--start", gg.start, "Start cell ROW,COL")->capture_default_str();
  gen->add_option("--goal", gg.goals, "Goal cell ROW,COL (repeatable)");
  gen->add_option("--obstacle", gg.obstacles, "Obstacle cell ROW,COL (repeatable)");
  gen->add_option("--from-ascii", gg.from_ascii, "Read the layout from an ASCII map");
  gen->add_option("--out", gg.out, "MDP output path")->capture_default_str();
  gen->add_option("--ascii-out", gg.ascii_out, "ASCII map output path (default: --out with .txt)");

  std::string validate_input;
  auto* val = app.add_subcommand("validate", "Parse and validate an MDP file");
  val->add_option("input", validate_input, "MDP file")->required();

  std::string convert_input, convert_format = "text", convert_out;
  auto* conv = app.add_subcommand("convert", "Rewrite an MDP file in canonical text or JSON");
  conv->add_option("input", convert_input, "MDP file")->required();
  conv->add_option("--format", convert_format)->check(CLI::IsMember({"text", "json"}))->capture_default_str();
  conv->add_option("--out", convert_out, "Output path (default: stdout)");

  SolveArgs sa;
  auto* sol = app.add_subcommand("solve", "Solve an MDP and write a JSON report");
  sol->add_option("input", sa.input, "MDP file")->required();
  sol->add_option("--solver", sa.solver)->check(CLI::IsMember({"pi", "em", "vi"}))->capture_default_str();
  sol->add_option("--eps", sa.eps, "Stopping threshold for pi/vi")->capture_default_str();
  sol->add_option("--eval", sa.eval, "Policy evaluation rule for pi")
      ->check(CLI::IsMember({"eps", "truncated"}))
      ->capture_default_str();
  sol->add_option("--sweeps", sa.sweeps, "Sweeps per round with --eval truncated")->capture_default_str();
  sol->add_option("--sweep-cap", sa.sweep_cap, "Sweep cap for pi/vi")->capture_default_str();
  sol->add_option("--tmax", sa.t_max, "EM horizon (default 2|S|)");
  sol->add_option("--prior", sa.prior)->check(CLI::IsMember({"flat", "discounted"}))->capture_default_str();
  sol->add_option("--gamma", sa.gamma, "Discount for --prior discounted");
  sol->add_option("--out", sa.out, "Report path (default: stdout)");

  VerifyArgs va;
  auto* ver = app.add_subcommand("verify-equivalence", "Check EM against truncated policy iteration round by round");
  ver->add_option("input", va.input, "MDP file")->required();
  ver->add_option("--tmax", va.t_max, "Horizon (default 2|S|)");
  ver->add_option("--max-rounds", va.max_rounds)->capture_default_str();
  ver->add_option("--out", va.out, "Table path (default: stdout)");
  ver->add_flag("--corrupt-beta", va.corrupt_beta)->group("");

  CompareArgs ca;
  auto* cmp = app.add_subcommand("compare-modes", "Roll out execution modes and tabulate cost statistics");
  cmp->add_option("input", ca.input, "MDP file")->required();
  cmp->add_option("--modes", ca.modes, "Comma-separated modes")->capture_default_str();
  cmp->add_option("--n", ca.n, "Rollouts per mode")->capture_default_str();
  cmp->add_option("--seed", ca.seed)->capture_default_str();
  cmp->add_option("--max-steps", ca.max_steps)->capture_default_str();
  cmp->add_option("--start", ca.start, "Start state (default: the file's start)");
  cmp->add_option("--eps", ca.eps, "Evaluation threshold for offline/replan")->capture_default_str();
  cmp->add_option("--tmax", ca.t_max, "probplan horizon (default 2|S|)");
  cmp->add_option("--prior", ca.prior)->check(CLI::IsMember({"flat", "discounted"}))->capture_default_str();
  cmp->add_option("--gamma", ca.gamma, "Discount for --prior discounted");
  cmp->add_option("--event", ca.event, "Cost surge STEP:MULTIPLIER:S1,S2,...");
  cmp->add_option("--workers", ca.workers, "Rollout threads")->capture_default_str();
  cmp->add_flag("--timing", ca.timing, "Report measured wall-clock per decision (otherwise 0)");
  cmp->add_option("--format", ca.format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  cmp->add_option("--out", ca.out, "Output path (default: stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kSuccess;
    }
    err << "error: " << e.what() << "\n";
    return kInputError;
  }

  try {
    if (*gen) return gen_grid(gg, out);
    if (*val) return validate_cmd(validate_input, out);
    if (*conv) return convert(convert_input, convert_format, convert_out, out);
    if (*sol) return solve(sa, out);
    if (*ver) return verify_equivalence(va, out);
    if (*cmp) return compare_modes(ca, out);
  } catch (const ParseError& e) {
    err << "invalid MDP: " << e.what() << "\n";
    return kInputError;
  } catch (const DivergenceError& e) {
    err << "divergence: " << e.what() << "\n";
    return kDivergence;
  } catch (const PolicyCycleError& e) {
    err << "no convergence: " << e.what() << "\n";
    return kDivergence;
  } catch (const NonConvergence& e) {
    err << "no convergence: " << e.what() << "\n";
    return kDivergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace ssp::cli
