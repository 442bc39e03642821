#pragma once
/**
 * @file cli.hpp
 * @brief Command-line surface: configuration parsing and subcommand dispatch.
 *
 * Configuration comes from defaults, an optional `key = value` file
 * (`--config`), the SKEWMEET_THREADS environment variable (threads only) and
 * command-line flags, in increasing precedence. Every effective value is
 * echoed into the report header, marked `set:` or `default:`; feeding those
 * lines back as a config file reproduces the run.
 *
 * Exit codes: 0 success, 1 runtime failure, 2 usage error.
 */

#include "skewmeet/calibration.hpp"
#include "skewmeet/criterion.hpp"
#include "skewmeet/csv.hpp"
#include "skewmeet/experiments.hpp"
#include "skewmeet/geometry.hpp"
#include "skewmeet/sde_engine.hpp"

#include <CLI11.hpp>
#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace skewmeet::cli {

/// Bad invocation or configuration; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Subcommand { Criterion, Simulate, Hitprob, Sweep, Selftest };
enum class Source { Default, File, Env, Flag };

inline constexpr std::string_view kThreadsEnv = "SKEWMEET_THREADS";

inline std::string_view to_string(Subcommand s) {
  switch (s) {
    case Subcommand::Criterion: return "criterion";
    case Subcommand::Simulate: return "simulate";
    case Subcommand::Hitprob: return "hitprob";
    case Subcommand::Sweep: return "sweep";
    case Subcommand::Selftest: return "selftest";
  }
  return "unknown";
}

inline std::optional<Subcommand> parse_subcommand(std::string_view name) {
  for (auto s : {Subcommand::Criterion, Subcommand::Simulate, Subcommand::Hitprob,
                 Subcommand::Sweep, Subcommand::Selftest}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

struct RunConfig {
  Subcommand subcommand = Subcommand::Criterion;
  double kappa1 = 0.5;
  double kappa2 = 0.5;
  double alpha = 0.5;
  Eigen::Vector2d x0{1.0, 1.0};
  double dt = calibration::kDt;
  double horizon = calibration::kHorizon;
  double epsilon = 0.05;
  std::vector<double> delta{calibration::kDeltaGrid.begin(), calibration::kDeltaGrid.end()};
  std::uint64_t trials = calibration::kTrials;
  std::uint64_t seed = calibration::kDefaultSeed;
  std::uint64_t trial = 0;
  std::uint64_t selftest_trials = 20000;
  std::string out_path;
  std::string path_out;
  unsigned threads = 0;  ///< 0 = auto
  std::vector<double> kappa_grid{-0.5, 0.25, 0.5};
  std::vector<double> alpha_grid{-0.5, 0.25, 0.5};
  bool sensitivity = true;

  /// Where each key's effective value came from, in key-table order.
  std::vector<std::pair<std::string, Source>> sources;

  SimParams sim_params() const {
    SimParams p;
    p.kappa1 = kappa1;
    p.kappa2 = kappa2;
    p.alpha = alpha;
    p.x0 = x0;
    p.dt = dt;
    p.horizon = horizon;
    p.seed = seed;
    p.trial_index = trial;
    p.epsilon = epsilon;
    return p;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

inline double parse_real(std::string_view key, std::string_view text) {
  const std::string t = trim(text);
  double value = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
    throw UsageError(std::string(key) + ": expected a real number, got '" +
                     std::string(text) + "'");
  }
  if (!std::isfinite(value)) {
    throw UsageError(std::string(key) + ": value must be finite");
  }
  return value;
}

inline std::uint64_t parse_count(std::string_view key, std::string_view text) {
  const std::string t = trim(text);
  std::uint64_t value = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
    throw UsageError(std::string(key) + ": expected a non-negative integer, got '" +
                     std::string(text) + "'");
  }
  return value;
}

inline std::vector<double> parse_list(std::string_view key, std::string_view text) {
  std::vector<double> out;
  for (const auto& field : csv::split_line(text)) out.push_back(parse_real(key, field));
  return out;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
  std::string t = trim(text);
  std::transform(t.begin(), t.end(), t.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw UsageError(std::string(key) + ": expected true or false, got '" +
                   std::string(text) + "'");
}

inline std::string join(const std::vector<double>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ',';
    s += csv::format_number(values[i]);
  }
  return s;
}

[[noreturn]] inline void domain(std::string_view key, const std::string& what,
                                std::string_view got) {
  throw UsageError(std::string(key) + ": " + what + ", got " + std::string(got));
}

inline void check_kappa(std::string_view key, double v) {
  if (!(std::abs(v) <= 1.0)) {
    domain(key, "must lie in the closed interval [-1, 1]", csv::format_number(v));
  }
}

inline void check_alpha(std::string_view key, double v) {
  if (!(std::abs(v) < 1.0)) {
    domain(key, "must lie in the open interval (-1, 1)", csv::format_number(v));
  }
}

struct KeySpec {
  std::string name;
  std::string help;
  std::function<void(RunConfig&, std::string_view)> parse;
  std::function<std::string(const RunConfig&)> print;
};

inline const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = [] {
    std::vector<KeySpec> t;
    auto real = [&t](std::string name, std::string help, double RunConfig::*field,
                     std::function<void(std::string_view, double)> check) {
      t.push_back({name, help,
                   [name, field, check](RunConfig& c, std::string_view text) {
                     const double v = parse_real(name, text);
                     check(name, v);
                     c.*field = v;
                   },
                   [field](const RunConfig& c) { return csv::format_number(c.*field); }});
    };
    auto count = [&t](std::string name, std::string help,
                      std::uint64_t RunConfig::*field, std::uint64_t minimum) {
      t.push_back({name, help,
                   [name, field, minimum](RunConfig& c, std::string_view text) {
                     const auto v = parse_count(name, text);
                     if (v < minimum) {
                       domain(name, "must be at least " + std::to_string(minimum),
                              std::to_string(v));
                     }
                     c.*field = v;
                   },
                   [field](const RunConfig& c) { return std::to_string(c.*field); }});
    };
    auto positive = [](std::string_view key, double v) {
      if (!(v > 0.0)) domain(key, "must be positive", csv::format_number(v));
    };

    real("kappa1", "permeability of the first membrane, in [-1, 1]", &RunConfig::kappa1,
         check_kappa);
    real("kappa2", "permeability of the second membrane, in [-1, 1]", &RunConfig::kappa2,
         check_kappa);
    real("alpha", "noise correlation, in (-1, 1)", &RunConfig::alpha, check_alpha);
    t.push_back({"x0", "start point 'x1,x2', not (0,0)",
                 [](RunConfig& c, std::string_view text) {
                   const auto v = parse_list("x0", text);
                   if (v.size() != 2) domain("x0", "expected two comma-separated reals", std::string(text));
                   if (v[0] == 0.0 && v[1] == 0.0) domain("x0", "must differ from (0,0)", std::string(text));
                   c.x0 = {v[0], v[1]};
                 },
                 [](const RunConfig& c) {
                   return csv::format_number(c.x0.x()) + "," + csv::format_number(c.x0.y());
                 }});
    real("dt", "time step, > 0", &RunConfig::dt, positive);
    real("horizon", "time horizon T, > dt", &RunConfig::horizon, positive);
    real("epsilon", "local-time bandwidth, > 0", &RunConfig::epsilon, positive);
    t.push_back({"delta", "strictly decreasing positive ball radii, comma-separated",
                 [](RunConfig& c, std::string_view text) {
                   auto v = parse_list("delta", text);
                   for (std::size_t i = 0; i < v.size(); ++i) {
                     if (!(v[i] > 0.0)) domain("delta", "values must be positive", std::string(text));
                     if (i > 0 && !(v[i] < v[i - 1])) {
                       domain("delta", "values must be strictly decreasing", std::string(text));
                     }
                   }
                   c.delta = std::move(v);
                 },
                 [](const RunConfig& c) { return join(c.delta); }});
    count("trials", "Monte Carlo trials per cell (>= 100 for hitprob and sweep)",
          &RunConfig::trials, 1);
    count("seed", "64-bit seed of the counter-based streams", &RunConfig::seed, 0);
    count("trial", "trial index used by simulate", &RunConfig::trial, 0);
    count("selftest_trials", "trials per kappa in the selftest marginal-law suite",
          &RunConfig::selftest_trials, 100);
    t.push_back({"out", "CSV output path",
                 [](RunConfig& c, std::string_view text) { c.out_path = trim(text); },
                 [](const RunConfig& c) { return c.out_path; }});
    t.push_back({"path_out", "trajectory CSV for simulate (empty: none)",
                 [](RunConfig& c, std::string_view text) { c.path_out = trim(text); },
                 [](const RunConfig& c) { return c.path_out; }});
    t.push_back({"threads", "worker threads, positive integer or 'auto'",
                 [](RunConfig& c, std::string_view text) {
                   const std::string v = trim(text);
                   if (v == "auto") {
                     c.threads = 0;
                     return;
                   }
                   const auto n = parse_count("threads", v);
                   if (n == 0 || n > 4096) domain("threads", "must be 'auto' or in [1, 4096]", v);
                   c.threads = static_cast<unsigned>(n);
                 },
                 [](const RunConfig& c) {
                   return c.threads == 0 ? std::string("auto") : std::to_string(c.threads);
                 }});
    t.push_back({"kappa_grid", "sweep values for kappa1 and kappa2",
                 [](RunConfig& c, std::string_view text) {
                   auto v = parse_list("kappa_grid", text);
                   for (double x : v) check_kappa("kappa_grid", x);
                   c.kappa_grid = std::move(v);
                 },
                 [](const RunConfig& c) { return join(c.kappa_grid); }});
    t.push_back({"alpha_grid", "sweep values for alpha",
                 [](RunConfig& c, std::string_view text) {
                   auto v = parse_list("alpha_grid", text);
                   for (double x : v) check_alpha("alpha_grid", x);
                   c.alpha_grid = std::move(v);
                 },
                 [](const RunConfig& c) { return join(c.alpha_grid); }});
    t.push_back({"sensitivity", "sweep: add a T-doubling row for the largest-S cell",
                 [](RunConfig& c, std::string_view text) {
                   c.sensitivity = parse_bool("sensitivity", text);
                 },
                 [](const RunConfig& c) {
                   return std::string(c.sensitivity ? "true" : "false");
                 }});
    return t;
  }();
  return table;
}

inline const KeySpec* find_key(std::string_view name) {
  for (const auto& k : key_table()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

/// Parses `key = value` lines; `#` starts a comment.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(
    std::string_view text, std::string_view origin) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw UsageError(std::string(origin) + ":" + std::to_string(lineno) +
                       ": expected 'key = value'");
    }
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (!find_key(key)) {
      throw UsageError(std::string(origin) + ":" + std::to_string(lineno) +
                       ": unknown key '" + key + "'");
    }
    entries.emplace_back(std::move(key), std::move(value));
  }
  return entries;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw UsageError("config: cannot open '" + path + "': " + std::strerror(errno));
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string usage_text() {
  std::ostringstream ss;
  ss << "usage: skewmeet <criterion|simulate|hitprob|sweep|selftest> [--key value ...]"
        " [--config FILE]\n\nkeys:\n";
  for (const auto& k : key_table()) {
    ss << "  --" << std::left << std::setw(16) << k.name << k.help << '\n';
  }
  return ss.str();
}

}  // namespace detail

/**
 * Builds the effective configuration from argv (without the program name),
 * an optional config file named by --config, and the thread-count
 * environment value. Throws UsageError on any invalid input.
 */
inline RunConfig parse_config(const std::vector<std::string>& args,
                              std::optional<std::string> env_threads = std::nullopt) {
  if (args.empty()) throw UsageError(detail::usage_text());
  const auto sub = parse_subcommand(args.front());
  if (!sub) {
    throw UsageError("unknown subcommand '" + args.front() + "'\n" + detail::usage_text());
  }

  CLI::App app{"skewmeet"};
  app.allow_extras(false);
  std::map<std::string, std::string> flag_values;
  std::string config_path;
  app.add_option("--config", config_path, "key = value configuration file");
  for (const auto& k : detail::key_table()) {
    app.add_option("--" + k.name, flag_values[k.name], k.help);
  }
  std::vector<std::string> rest(args.begin() + 1, args.end());
  for (const auto& token : rest) {
    if (token.rfind("--", 0) != 0 || token == "--help") continue;
    const std::string name = token.substr(2, token.find('=') - 2);
    if (name != "config" && !detail::find_key(name)) {
      throw UsageError("unknown key '" + name + "'\n" + detail::usage_text());
    }
  }
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    throw UsageError(detail::usage_text());
  } catch (const CLI::ParseError& e) {
    throw UsageError(std::string(e.what()) + "\n" + detail::usage_text());
  }

  RunConfig cfg;
  cfg.subcommand = *sub;
  cfg.out_path = std::string(to_string(*sub)) + ".csv";
  std::map<std::string, std::pair<std::string, Source>> chosen;
  if (!config_path.empty()) {
    for (auto& [key, value] :
         detail::parse_config_text(detail::read_file(config_path), config_path)) {
      chosen[key] = {value, Source::File};
    }
  }
  if (env_threads && !env_threads->empty()) {
    chosen["threads"] = {*env_threads, Source::Env};
  }
  for (const auto& k : detail::key_table()) {
    if (app.count("--" + k.name) > 0) chosen[k.name] = {flag_values[k.name], Source::Flag};
  }
  for (const auto& k : detail::key_table()) {
    const auto it = chosen.find(k.name);
    if (it != chosen.end()) {
      k.parse(cfg, it->second.first);
      cfg.sources.emplace_back(k.name, it->second.second);
    } else {
      cfg.sources.emplace_back(k.name, Source::Default);
    }
  }

  if (!(cfg.horizon > cfg.dt)) {
    detail::domain("horizon", "must exceed dt (" + csv::format_number(cfg.dt) + ")",
                   csv::format_number(cfg.horizon));
  }
  if ((cfg.subcommand == Subcommand::Hitprob || cfg.subcommand == Subcommand::Sweep) &&
      cfg.trials < 100) {
    detail::domain("trials", "must be at least 100 for " + std::string(to_string(cfg.subcommand)),
                   std::to_string(cfg.trials));
  }
  return cfg;
}

/// Header block: subcommand, every effective key, calibration constants.
inline void write_report_header(std::ostream& out, const RunConfig& cfg) {
  out << "# skewmeet report\n";
  out << "# schema_version: " << kReportSchemaVersion << '\n';
  out << "# subcommand: " << to_string(cfg.subcommand) << '\n';
  for (const auto& [name, source] : cfg.sources) {
    const auto* key = detail::find_key(name);
    out << "# " << (source == Source::Default ? "default: " : "set: ") << name << " = "
        << key->print(cfg) << '\n';
  }
  out << "# calibration: hit_retention_min = "
      << csv::format_number(calibration::kHitRetentionMin) << '\n'
      << "# calibration: nohit_retention_max = "
      << csv::format_number(calibration::kNoHitRetentionMax) << '\n'
      << "# calibration: terminal_ratio_min = "
      << csv::format_number(calibration::kTerminalRatioMin) << '\n'
      << "# calibration: sweep_retention_threshold = "
      << csv::format_number(calibration::kSweepRetentionThreshold) << '\n'
      << "# note: the hitting law is a zero-one statement without rates; the "
         "thresholds above are pilot calibration constants, not exact values\n"
      << "# note: exact hitting of (0,0) is probed by entry into the sup-norm "
         "delta-ball on the time grid within the horizon T\n";
}

/// Recovers the effective configuration from a report's header block.
inline RunConfig config_from_header(std::string_view report) {
  std::istringstream in{std::string(report)};
  std::string line;
  std::string sub;
  std::ostringstream text;
  while (std::getline(in, line)) {
    if (line.rfind("# subcommand: ", 0) == 0) sub = line.substr(14);
    for (std::string_view prefix : {"# set: ", "# default: "}) {
      if (line.rfind(prefix, 0) == 0) text << line.substr(prefix.size()) << '\n';
    }
  }
  const auto parsed = parse_subcommand(sub);
  if (!parsed) throw UsageError("report header has no subcommand line");
  RunConfig cfg;
  cfg.subcommand = *parsed;
  for (const auto& [key, value] : detail::parse_config_text(text.str(), "header")) {
    detail::find_key(key)->parse(cfg, value);
  }
  return cfg;
}

namespace detail {

inline void open_output(std::ofstream& file, const std::string& path) {
  file.open(path, std::ios::binary | std::ios::trunc);
  if (!file) {
    throw std::runtime_error("cannot write '" + path + "': " + std::strerror(errno));
  }
}

inline void finish_output(std::ofstream& file, const std::string& path) {
  file.flush();
  if (!file) {
    throw std::runtime_error("write to '" + path + "' failed: " + std::strerror(errno));
  }
}

inline std::string fmt(double x, int precision = 6) {
  std::ostringstream ss;
  ss << std::setprecision(precision) << x;
  return ss.str();
}

inline std::string vec(const std::vector<double>& v, int precision = 6) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i], precision);
  return s + ")";
}

inline int run_criterion(const RunConfig& cfg, std::ostream& out) {
  const ChainSolution sol = analyze_four_ray(cfg.kappa1, cfg.kappa2, cfg.alpha);
  const CorrelationModel model = build_correlation_model(cfg.alpha);
  const Verdict shortcut = theorem_decision(cfg.kappa1, cfg.kappa2, cfg.alpha);

  out << "kappa1 = " << fmt(cfg.kappa1) << ", kappa2 = " << fmt(cfg.kappa2)
      << ", alpha = " << fmt(cfg.alpha) << '\n';
  out << "transform: a = " << fmt(model.a, 10) << ", b = " << fmt(model.b, 10)
      << ", c = " << fmt(model.c, 10) << ", xi = " << fmt(membrane_angle(cfg.alpha), 10)
      << '\n';
  out << "p_tilde = " << vec(sol.p_tilde) << '\n';
  out << "q_tilde = " << vec(sol.q_tilde) << '\n';
  out << "pi = " << vec(sol.pi) << "  [" << skewmeet::to_string(sol.method) << "]\n";
  if (sol.D) out << "D = " << fmt(*sol.D, 10) << '\n';
  out << "S = " << fmt(sol.S, 10) << '\n';
  try {
    const ChainSolution generic =
        solve_chain(build_four_ray_config(cfg.kappa1, cfg.kappa2, cfg.alpha));
    out << "S (generic linear solve) = " << fmt(generic.S, 10) << '\n';
  } catch (const NonUniqueStationary&) {
    out << "S (generic linear solve) = n/a (stationary law not unique)\n";
  }
  out << "verdict: " << skewmeet::to_string(sol.verdict) << '\n';
  out << "kappa1*kappa2*alpha = " << fmt(cfg.kappa1 * cfg.kappa2 * cfg.alpha)
      << " -> " << skewmeet::to_string(shortcut) << " ("
      << (shortcut == sol.verdict ? "agrees" : "DISAGREES") << ")\n";
  out << "note: the zero-one law assumes a start point other than (0,0)\n";

  std::ofstream file;
  open_output(file, cfg.out_path);
  write_report_header(file, cfg);
  csv::write_header(file);
  csv::Row row;
  row.kappa1 = cfg.kappa1;
  row.kappa2 = cfg.kappa2;
  row.alpha = cfg.alpha;
  row.S = sol.S;
  row.verdict = sol.verdict;
  csv::write_row(file, row);
  finish_output(file, cfg.out_path);
  return shortcut == sol.verdict ? 0 : 1;
}

inline int run_simulate(const RunConfig& cfg, std::ostream& out) {
  const SimParams params = cfg.sim_params();
  PathOptions options;
  options.deltas = cfg.delta;
  options.record = true;
  const PathResult path = simulate_pair(params, options);
  const LocalTimeEstimate lt = local_time_estimate(path, cfg.epsilon);
  const ChainSolution sol = analyze_four_ray(cfg.kappa1, cfg.kappa2, cfg.alpha);

  out << "simulated " << path.steps_taken << " steps of dt = " << fmt(cfg.dt)
      << " (trial " << cfg.trial << ", seed " << cfg.seed << ")\n";
  out << "final state = (" << fmt(path.final_state.x()) << ", "
      << fmt(path.final_state.y()) << ")\n";
  out << "zero visits: " << path.crossings_1 << ", " << path.crossings_2 << '\n';
  out << "local time (eps = " << fmt(cfg.epsilon) << "): " << fmt(lt.L1) << ", "
      << fmt(lt.L2) << '\n';
  if (lt.under_resolved) {
    out << "warning: epsilon < 3 sqrt(dt); the occupation estimate is under-resolved\n";
  }
  for (std::size_t j = 0; j < cfg.delta.size(); ++j) {
    out << "delta = " << fmt(cfg.delta[j]) << ": ";
    if (path.joint_hit_times[j]) {
      out << "joint hit at t = " << fmt(*path.joint_hit_times[j]) << '\n';
    } else {
      out << "no joint hit by T = " << fmt(cfg.horizon) << '\n';
    }
  }
  out << "exact verdict: " << skewmeet::to_string(sol.verdict) << " (S = " << fmt(sol.S)
      << ")\n";

  std::ofstream file;
  open_output(file, cfg.out_path);
  write_report_header(file, cfg);
  csv::write_header(file);
  for (std::size_t j = 0; j < cfg.delta.size(); ++j) {
    csv::Row row;
    row.kappa1 = cfg.kappa1;
    row.kappa2 = cfg.kappa2;
    row.alpha = cfg.alpha;
    row.delta = cfg.delta[j];
    row.horizon = cfg.horizon;
    row.dt = cfg.dt;
    row.trials = 1;
    row.S = sol.S;
    row.verdict = sol.verdict;
    row.hit_prob = path.joint_hit_times[j] ? 1.0 : 0.0;
    row.seed = cfg.seed;
    csv::write_row(file, row);
  }
  finish_output(file, cfg.out_path);

  if (!cfg.path_out.empty()) {
    std::ofstream traj;
    open_output(traj, cfg.path_out);
    traj << "t,x1,x2\n";
    for (std::size_t i = 0; i < path.times.size(); ++i) {
      traj << csv::format_number(path.times[i]) << ',' << csv::format_number(path.x1[i])
           << ',' << csv::format_number(path.x2[i]) << '\n';
    }
    finish_output(traj, cfg.path_out);
  }
  return 0;
}

inline void print_report(std::ostream& out, const ExperimentReport& rep) {
  out << "kappa1 = " << fmt(rep.params.kappa1) << ", kappa2 = " << fmt(rep.params.kappa2)
      << ", alpha = " << fmt(rep.params.alpha) << ", S = " << fmt(rep.S) << ", verdict "
      << skewmeet::to_string(rep.verdict_expected) << ", T = " << fmt(rep.params.horizon)
      << ", trials = " << rep.trials << '\n';
  for (std::size_t j = 0; j < rep.delta_grid.size(); ++j) {
    out << "  delta = " << std::setw(8) << fmt(rep.delta_grid[j])
        << "  hit_prob = " << fmt(rep.hit_prob[j], 4) << "  95% CI [" << fmt(rep.ci[j].lo, 4)
        << ", " << fmt(rep.ci[j].hi, 4) << "]\n";
  }
  const auto ret = rep.retention();
  out << "  retention per delta step:";
  for (double r : ret) out << ' ' << fmt(r, 4);
  out << "  overall " << fmt(rep.overall_retention(), 4) << '\n';
  if (rep.underpowered) {
    out << "  warning: a confidence half-width exceeds "
        << fmt(calibration::kMaxHalfWidth) << " (under-powered)\n";
  }
}

inline int run_hitprob(const RunConfig& cfg, std::ostream& out) {
  const ExperimentReport rep =
      estimate_joint_hit(cfg.sim_params(), cfg.delta, cfg.trials, cfg.threads);
  print_report(out, rep);
  out << "empirical reading (retention threshold "
      << fmt(calibration::kSweepRetentionThreshold) << "): "
      << skewmeet::to_string(empirical_verdict(rep)) << '\n';
  out << "runtime " << fmt(rep.runtime_seconds, 3) << " s\n";

  std::ofstream file;
  open_output(file, cfg.out_path);
  write_report_header(file, cfg);
  csv::write_header(file);
  for (const auto& row : csv::rows_from_report(rep)) csv::write_row(file, row);
  finish_output(file, cfg.out_path);
  return 0;
}

inline int run_sweep(const RunConfig& cfg, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  SweepGrid grid{cfg.kappa_grid, cfg.kappa_grid, cfg.alpha_grid};
  const SweepResult res = sweep(grid, cfg.sim_params(), cfg.delta, cfg.trials, cfg.threads);

  std::ofstream file;
  open_output(file, cfg.out_path);
  write_report_header(file, cfg);
  csv::write_header(file);
  out << "kappa1   kappa2   alpha        S  verdict  retention  empirical  agree\n";
  int failures = 0;
  for (const auto& row : res.rows) {
    if (!row.report) {
      ++failures;
      out << fmt(row.kappa1) << ' ' << fmt(row.kappa2) << ' ' << fmt(row.alpha)
          << "  failed: " << row.error << '\n';
      continue;
    }
    out << std::setw(6) << fmt(row.kappa1) << ' ' << std::setw(8) << fmt(row.kappa2) << ' '
        << std::setw(7) << fmt(row.alpha) << ' ' << std::setw(9) << fmt(row.S, 4) << "  "
        << std::setw(7) << skewmeet::to_string(row.verdict) << "  " << std::setw(9)
        << fmt(row.retention, 4) << "  " << std::setw(9)
        << skewmeet::to_string(row.empirical) << "  "
        << (row.concordant ? "yes" : (row.near_zero ? "no (|S| near 0)" : "NO")) << '\n';
    for (const auto& r : csv::rows_from_report(*row.report)) csv::write_row(file, r);
  }
  out << "concordant cells: " << res.concordant << " / " << res.evaluated << '\n';

  if (cfg.sensitivity) {
    const SweepRow* best = nullptr;
    for (const auto& row : res.rows) {
      if (row.report && row.verdict == Verdict::HitsAlmostSurely &&
          (!best || row.S > best->S)) {
        best = &row;
      }
    }
    if (best) {
      SimParams doubled = best->report->params;
      doubled.horizon *= 2.0;
      const auto rep = estimate_joint_hit(doubled, cfg.delta, cfg.trials, cfg.threads);
      out << "horizon sensitivity (T doubled):\n";
      print_report(out, rep);
      for (const auto& r : csv::rows_from_report(rep)) csv::write_row(file, r);
    }
  }
  finish_output(file, cfg.out_path);
  out << "runtime "
      << fmt(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 3)
      << " s\n";
  return failures == 0 ? 0 : 1;
}

inline int run_selftest(const RunConfig& cfg, std::ostream& out) {
  bool ok = true;
  const std::vector<double> kappas{-0.5, 0.0, 0.5, 1.0};
  out << "marginal law P(x(1) > 0) = (1 + kappa)/2, " << cfg.selftest_trials
      << " trials, dt = 0.001\n";
  for (const auto& row :
       marginal_law_suite(kappas, 1.0, 1e-3, cfg.selftest_trials, cfg.seed, cfg.threads)) {
    out << "  kappa = " << std::setw(5) << fmt(row.kappa) << "  p_hat = " << fmt(row.p_hat, 5)
        << "  expected " << fmt(row.expected, 5) << "  " << (row.pass ? "ok" : "FAIL") << '\n';
    ok = ok && row.pass;
  }
  out << "whitened increments, 100000 draws:\n";
  for (double alpha : {-0.9, -0.5, 0.5, 0.9}) {
    const auto d = decorrelation_test(alpha, 100000, cfg.seed);
    out << "  alpha = " << std::setw(5) << fmt(alpha) << "  raw rho = " << fmt(d.rho_raw, 4)
        << "  whitened rho = " << fmt(d.rho_hat, 3) << "  bound " << fmt(d.bound, 3) << "  "
        << (d.pass ? "ok" : "FAIL") << '\n';
    ok = ok && d.pass;
  }
  const std::vector<double> values{-0.9, -0.7, -0.5, -0.3, -0.1, 0.2, 0.4, 0.6, 0.8};
  double worst_pi = 0.0;
  double worst_s = 0.0;
  bool signs = true;
  for (double k1 : values) {
    for (double k2 : values) {
      for (double a : values) {
        const RayConfig rc = build_four_ray_config(k1, k2, a);
        const ChainSolution generic = solve_chain(rc);
        const auto cf = closed_form_pi_four_ray(k1, k2, membrane_angle(a));
        for (std::size_t k = 0; k < 4; ++k) {
          worst_pi = std::max(worst_pi, std::abs(generic.pi[k] - cf.pi[k]));
        }
        worst_s = std::max(worst_s, std::abs(generic.S - closed_form_S_four_ray(k1, k2, a)));
        signs = signs && generic.verdict == theorem_decision(k1, k2, a);
      }
    }
  }
  const bool exact_ok = worst_pi <= 1e-10 && worst_s <= 1e-10 && signs;
  out << "closed form vs linear solve on 9x9x9 grid: max |dpi| = " << fmt(worst_pi, 3)
      << ", max |dS| = " << fmt(worst_s, 3) << ", sign law " << (signs ? "holds" : "BROKEN")
      << "  " << (exact_ok ? "ok" : "FAIL") << '\n';
  ok = ok && exact_ok;
  out << (ok ? "selftest passed\n" : "selftest FAILED\n");
  return ok ? 0 : 1;
}

}  // namespace detail

/// Executes a parsed configuration; returns the process exit code.
inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    switch (cfg.subcommand) {
      case Subcommand::Criterion: return detail::run_criterion(cfg, out);
      case Subcommand::Simulate: return detail::run_simulate(cfg, out);
      case Subcommand::Hitprob: return detail::run_hitprob(cfg, out);
      case Subcommand::Sweep: return detail::run_sweep(cfg, out);
      case Subcommand::Selftest: return detail::run_selftest(cfg, out);
    }
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

/// Full entry point: parse, run, map errors to exit codes.
inline int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
                std::optional<std::string> env_threads = std::nullopt) {
  RunConfig cfg;
  try {
    cfg = parse_config(args, std::move(env_threads));
  } catch (const UsageError& e) {
    err << e.what() << '\n';
    return 2;
  }
  return run(cfg, out, err);
}

}  // namespace skewmeet::cli
