#pragma once
/**
 * @file experiments.hpp
 * @brief Monte Carlo studies that set simulated joint hitting against the
 *        exact verdict, plus statistical self-checks of the engine.
 *
 * Every trial i uses the stream keyed by (seed, i), and all reductions fold
 * the per-trial results in index order, so a report is a function of its
 * inputs alone.
 */

#include "skewmeet/calibration.hpp"
#include "skewmeet/criterion.hpp"
#include "skewmeet/geometry.hpp"
#include "skewmeet/parallel.hpp"
#include "skewmeet/philox.hpp"
#include "skewmeet/sde_engine.hpp"
#include "skewmeet/stats.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace skewmeet {

inline constexpr int kReportSchemaVersion = 1;

struct ExperimentReport {
  SimParams params;
  std::vector<double> delta_grid;
  std::vector<std::uint64_t> hits;
  std::vector<double> hit_prob;
  std::vector<Interval> ci;
  std::vector<double> ci_halfwidth;
  std::uint64_t trials = 0;
  double S = 0.0;
  Verdict verdict_expected = Verdict::DoesNotHit;
  double runtime_seconds = 0.0;
  int schema_version = kReportSchemaVersion;
  /// True when some half-width exceeds calibration::kMaxHalfWidth.
  bool underpowered = false;

  /// hit_prob[j+1] / hit_prob[j]; NaN when hit_prob[j] is zero.
  std::vector<double> retention() const {
    std::vector<double> out;
    for (std::size_t j = 0; j + 1 < hit_prob.size(); ++j) {
      out.push_back(hit_prob[j] > 0.0 ? hit_prob[j + 1] / hit_prob[j]
                                      : std::numeric_limits<double>::quiet_NaN());
    }
    return out;
  }

  /// hit_prob at the smallest delta over hit_prob at the largest.
  double overall_retention() const {
    if (hit_prob.empty() || hit_prob.front() == 0.0) {
      return std::numeric_limits<double>::quiet_NaN();
    }
    return hit_prob.back() / hit_prob.front();
  }
};

namespace detail {

inline void require_delta_grid(std::span<const double> grid) {
  if (grid.empty()) throw DomainError("delta grid must not be empty");
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (!(grid[j] > 0.0)) throw DomainError("delta values must be positive");
    if (j > 0 && !(grid[j] < grid[j - 1])) {
      throw DomainError("delta grid must be strictly decreasing");
    }
  }
}

}  // namespace detail

/**
 * Fraction of trials whose path enters the sup-norm delta-ball around the
 * origin by the horizon, for every delta of the grid, with Wilson intervals.
 * params.trial_index is ignored: trial i runs on stream (seed, i).
 */
inline ExperimentReport estimate_joint_hit(const SimParams& params,
                                           std::span<const double> delta_grid,
                                           std::uint64_t trials,
                                           unsigned threads = 0) {
  params.validate();
  detail::require_delta_grid(delta_grid);
  if (trials < 100) throw DomainError("trials must be at least 100");

  const auto start = std::chrono::steady_clock::now();
  PathOptions options;
  options.deltas.assign(delta_grid.begin(), delta_grid.end());
  options.record = false;
  options.stop_when_all_hit = true;

  const auto per_trial = parallel_map(trials, threads, [&](std::uint64_t i) {
    SimParams p = params;
    p.trial_index = i;
    const PathResult r = simulate_pair(p, options);
    std::vector<char> hit(r.joint_hit_times.size());
    for (std::size_t j = 0; j < hit.size(); ++j) hit[j] = r.joint_hit_times[j].has_value();
    return hit;
  });

  ExperimentReport rep;
  rep.params = params;
  rep.params.trial_index = 0;
  rep.delta_grid.assign(delta_grid.begin(), delta_grid.end());
  rep.trials = trials;
  rep.hits.assign(delta_grid.size(), 0);
  for (const auto& hit : per_trial) {
    for (std::size_t j = 0; j < hit.size(); ++j) rep.hits[j] += hit[j] ? 1 : 0;
  }
  for (std::size_t j = 0; j < delta_grid.size(); ++j) {
    rep.hit_prob.push_back(static_cast<double>(rep.hits[j]) /
                           static_cast<double>(trials));
    rep.ci.push_back(wilson_interval(rep.hits[j], trials));
    rep.ci_halfwidth.push_back(rep.ci.back().half_width());
    rep.underpowered = rep.underpowered ||
                       rep.ci_halfwidth.back() > calibration::kMaxHalfWidth;
  }
  const ChainSolution sol = analyze_four_ray(params.kappa1, params.kappa2, params.alpha);
  rep.S = sol.S;
  rep.verdict_expected = sol.verdict;
  rep.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

struct ContrastRow {
  double delta = 0.0;
  double p_pos = 0.0;
  double p_neg = 0.0;
  /// p_pos / p_neg, or a lower bound p_pos / ci_hi(neg) when p_neg = 0.
  double ratio = 0.0;
  Interval ratio_ci;
  bool lower_bound_only = false;
};

struct ContrastTable {
  ExperimentReport positive;
  ExperimentReport negative;
  std::vector<ContrastRow> rows;
  /// Ratios increase as delta decreases.
  bool increasing = true;

  const ContrastRow& terminal() const { return rows.back(); }
};

/**
 * Runs two arms that differ only in the signs of kappa1, kappa2, alpha and
 * reports the per-delta hit-probability ratio.
 */
inline ContrastTable dichotomy_contrast(const SimParams& positive,
                                        const SimParams& negative,
                                        std::span<const double> delta_grid,
                                        std::uint64_t trials, unsigned threads = 0) {
  const bool same_magnitudes = std::abs(positive.kappa1) == std::abs(negative.kappa1) &&
                               std::abs(positive.kappa2) == std::abs(negative.kappa2) &&
                               std::abs(positive.alpha) == std::abs(negative.alpha);
  const bool same_numerics = positive.x0 == negative.x0 && positive.dt == negative.dt &&
                             positive.horizon == negative.horizon &&
                             positive.seed == negative.seed &&
                             positive.epsilon == negative.epsilon;
  if (!same_magnitudes || !same_numerics) {
    throw std::invalid_argument(
        "contrast arms may differ only in the signs of kappa1, kappa2, alpha");
  }
  ContrastTable table;
  table.positive = estimate_joint_hit(positive, delta_grid, trials, threads);
  table.negative = estimate_joint_hit(negative, delta_grid, trials, threads);
  for (std::size_t j = 0; j < delta_grid.size(); ++j) {
    ContrastRow row;
    row.delta = delta_grid[j];
    row.p_pos = table.positive.hit_prob[j];
    row.p_neg = table.negative.hit_prob[j];
    const std::uint64_t kp = table.positive.hits[j];
    const std::uint64_t kn = table.negative.hits[j];
    if (kn == 0) {
      row.lower_bound_only = true;
      row.ratio = row.p_pos / table.negative.ci[j].hi;
      row.ratio_ci = {row.ratio, std::numeric_limits<double>::infinity()};
    } else if (kp == 0) {
      row.ratio = 0.0;
      row.ratio_ci = {0.0, table.positive.ci[j].hi / row.p_neg};
    } else {
      row.ratio = row.p_pos / row.p_neg;
      row.ratio_ci = ratio_interval(kp, trials, kn, trials);
    }
    if (!table.rows.empty() && !(row.ratio > table.rows.back().ratio)) {
      table.increasing = false;
    }
    table.rows.push_back(row);
  }
  return table;
}

struct MarginalRow {
  double kappa = 0.0;
  double p_hat = 0.0;
  double expected = 0.0;
  double stderr_ = 0.0;
  Interval ci;
  bool pass = false;
};

/**
 * Runs one skew coordinate from 0 over [0, t] per trial and compares
 * P(x(t) > 0) with (1 + kappa)/2; a row passes within 3 standard errors plus
 * a 0.005 discretization allowance.
 */
inline std::vector<MarginalRow> marginal_law_suite(std::span<const double> kappas,
                                                   double t, double dt,
                                                   std::uint64_t trials,
                                                   std::uint64_t seed,
                                                   unsigned threads = 0) {
  std::vector<MarginalRow> rows;
  for (double kappa : kappas) {
    detail::require_kappa("kappa", kappa);
    const auto positive = parallel_map(trials, threads, [&](std::uint64_t i) {
      const TrialStream stream(seed, i);
      return simulate_single(kappa, 0.0, t, dt, 0.05, stream).final_value > 0.0 ? 1 : 0;
    });
    const std::uint64_t k =
        std::accumulate(positive.begin(), positive.end(), std::uint64_t{0});
    MarginalRow row;
    row.kappa = kappa;
    row.p_hat = static_cast<double>(k) / static_cast<double>(trials);
    row.expected = 0.5 * (1.0 + kappa);
    row.stderr_ = binomial_stderr(row.expected, trials);
    row.ci = wilson_interval(k, trials);
    row.pass = std::abs(row.p_hat - row.expected) <= 3.0 * row.stderr_ + 0.005;
    rows.push_back(row);
  }
  return rows;
}

struct DecorrelationResult {
  double rho_hat = 0.0;  ///< after whitening
  double rho_raw = 0.0;  ///< before whitening
  double bound = 0.0;    ///< 3 / sqrt(count)
  bool pass = false;
};

/// Whitens correlated increments with A and tests the sample cross-correlation.
inline DecorrelationResult decorrelation_test(double alpha, std::uint64_t count,
                                              std::uint64_t seed) {
  const CorrelationModel model = build_correlation_model(alpha);
  const Eigen::Matrix2d whiten = model.whitening();
  const auto inc = correlated_increments(alpha, 1.0, count, TrialStream(seed, 0));
  std::vector<double> r1(count), r2(count), w1(count), w2(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    r1[i] = inc[i].x();
    r2[i] = inc[i].y();
    const Eigen::Vector2d w = whiten * inc[i];
    w1[i] = w.x();
    w2[i] = w.y();
  }
  DecorrelationResult res;
  res.rho_raw = sample_correlation(r1, r2);
  res.rho_hat = sample_correlation(w1, w2);
  res.bound = 3.0 / std::sqrt(static_cast<double>(count));
  res.pass = std::abs(res.rho_hat) <= res.bound;
  return res;
}

struct SweepGrid {
  std::vector<double> kappa1;
  std::vector<double> kappa2;
  std::vector<double> alpha;
};

struct SweepRow {
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double alpha = 0.0;
  double S = 0.0;
  Verdict verdict = Verdict::DoesNotHit;
  std::optional<ExperimentReport> report;
  std::string error;
  /// hit_prob(delta_min) / hit_prob(delta_max).
  double retention = std::numeric_limits<double>::quiet_NaN();
  Verdict empirical = Verdict::DoesNotHit;
  bool concordant = false;
  bool near_zero = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::size_t concordant = 0;
  std::size_t evaluated = 0;
  /// Every discordant cell lies among the smallest-|S| cells.
  bool discordance_near_zero = true;
};

/// Empirical reading of a report against the calibrated retention threshold.
inline Verdict empirical_verdict(const ExperimentReport& rep,
                                 double threshold = calibration::kSweepRetentionThreshold) {
  const double r = rep.overall_retention();
  return (!std::isnan(r) && r > threshold) ? Verdict::HitsAlmostSurely
                                           : Verdict::DoesNotHit;
}

/**
 * One row per (kappa1, kappa2, alpha) cell: exact S and verdict, the joint
 * hitting report, and whether the empirical reading agrees. A failing cell
 * keeps its error text and the sweep moves on.
 */
inline SweepResult sweep(const SweepGrid& grid, const SimParams& base,
                         std::span<const double> delta_grid, std::uint64_t trials,
                         unsigned threads = 0) {
  SweepResult out;
  for (double k1 : grid.kappa1) {
    for (double k2 : grid.kappa2) {
      for (double a : grid.alpha) {
        SweepRow row;
        row.kappa1 = k1;
        row.kappa2 = k2;
        row.alpha = a;
        try {
          const ChainSolution sol = analyze_four_ray(k1, k2, a);
          row.S = sol.S;
          row.verdict = sol.verdict;
          SimParams p = base;
          p.kappa1 = k1;
          p.kappa2 = k2;
          p.alpha = a;
          row.report = estimate_joint_hit(p, delta_grid, trials, threads);
          row.retention = row.report->overall_retention();
          row.empirical = empirical_verdict(*row.report);
          row.concordant = row.empirical == row.verdict;
        } catch (const std::exception& e) {
          row.error = e.what();
        }
        out.rows.push_back(std::move(row));
      }
    }
  }

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    if (out.rows[i].report) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::abs(out.rows[x].S) < std::abs(out.rows[y].S);
  });
  const auto near_zero_count = static_cast<std::size_t>(
      std::ceil(calibration::kSweepNearZeroShare * static_cast<double>(order.size())));
  for (std::size_t r = 0; r < order.size(); ++r) {
    out.rows[order[r]].near_zero = r < near_zero_count;
  }
  for (const auto& row : out.rows) {
    if (!row.report) continue;
    ++out.evaluated;
    if (row.concordant) {
      ++out.concordant;
    } else if (!row.near_zero) {
      out.discordance_near_zero = false;
    }
  }
  return out;
}

/// The same cell at horizon T and 2T.
inline std::pair<ExperimentReport, ExperimentReport> horizon_sensitivity(
    const SimParams& params, std::span<const double> delta_grid, std::uint64_t trials,
    unsigned threads = 0) {
  SimParams doubled = params;
  doubled.horizon = 2.0 * params.horizon;
  return {estimate_joint_hit(params, delta_grid, trials, threads),
          estimate_joint_hit(doubled, delta_grid, trials, threads)};
}

}  // namespace skewmeet
