#pragma once
// Report CSV: fixed column order, shortest round-trip number formatting.

#include "skewmeet/criterion.hpp"
#include "skewmeet/experiments.hpp"

#include <array>
#include <charconv>
#include <cstdint>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace skewmeet::csv {

inline constexpr std::array<std::string_view, 13> kColumns{
    "kappa1", "kappa2", "alpha", "delta", "T",      "dt",   "trials",
    "S",      "verdict", "hit_prob", "ci_lo", "ci_hi", "seed"};

/// Shortest representation that parses back to the same double.
inline std::string format_number(double x) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  if (res.ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf.data(), res.ptr);
}

struct Row {
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double alpha = 0.0;
  std::optional<double> delta;
  std::optional<double> horizon;
  std::optional<double> dt;
  std::optional<std::uint64_t> trials;
  double S = 0.0;
  Verdict verdict = Verdict::DoesNotHit;
  std::optional<double> hit_prob;
  std::optional<double> ci_lo;
  std::optional<double> ci_hi;
  std::optional<std::uint64_t> seed;
};

inline void write_header(std::ostream& out) {
  for (std::size_t i = 0; i < kColumns.size(); ++i) {
    out << (i ? "," : "") << kColumns[i];
  }
  out << '\n';
}

inline void write_row(std::ostream& out, const Row& r) {
  auto num = [](const std::optional<double>& v) {
    return v ? format_number(*v) : std::string{};
  };
  auto count = [](const std::optional<std::uint64_t>& v) {
    return v ? std::to_string(*v) : std::string{};
  };
  out << format_number(r.kappa1) << ',' << format_number(r.kappa2) << ','
      << format_number(r.alpha) << ',' << num(r.delta) << ',' << num(r.horizon) << ','
      << num(r.dt) << ',' << count(r.trials) << ',' << format_number(r.S) << ','
      << to_string(r.verdict) << ',' << num(r.hit_prob) << ',' << num(r.ci_lo) << ','
      << num(r.ci_hi) << ',' << count(r.seed) << '\n';
}

/// One row per delta of an experiment report.
inline std::vector<Row> rows_from_report(const ExperimentReport& rep) {
  std::vector<Row> rows;
  for (std::size_t j = 0; j < rep.delta_grid.size(); ++j) {
    Row r;
    r.kappa1 = rep.params.kappa1;
    r.kappa2 = rep.params.kappa2;
    r.alpha = rep.params.alpha;
    r.delta = rep.delta_grid[j];
    r.horizon = rep.params.horizon;
    r.dt = rep.params.dt;
    r.trials = rep.trials;
    r.S = rep.S;
    r.verdict = rep.verdict_expected;
    r.hit_prob = rep.hit_prob[j];
    r.ci_lo = rep.ci[j].lo;
    r.ci_hi = rep.ci[j].hi;
    r.seed = rep.params.seed;
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    fields.emplace_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

}  // namespace skewmeet::csv
