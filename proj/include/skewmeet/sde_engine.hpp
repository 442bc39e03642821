#pragma once
/**
 * @file sde_engine.hpp
 * @brief Path simulation of two correlated skew Brownian motions.
 *
 * Each coordinate solves x(t) = x(0) + w(t) + kappa L(t). The scheme takes
 * an Euler step y = x + dw with correlated dw, decides whether the Brownian
 * bridge from x to y touched zero, and on a touch re-draws the side of the
 * excursion: positive with probability (1 + kappa)/2. This is the excursion
 * construction of skew Brownian motion (|W| with independent excursion
 * signs) and reproduces the one-dimensional law exactly on the time grid.
 */

#include "skewmeet/geometry.hpp"
#include "skewmeet/philox.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace skewmeet {

struct SimParams {
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double alpha = 0.0;
  Eigen::Vector2d x0{1.0, 1.0};
  double dt = 1e-3;
  double horizon = 50.0;
  std::uint64_t seed = 0;
  std::uint64_t trial_index = 0;
  /// Occupation bandwidth of the running local-time estimate.
  double epsilon = 0.05;

  void validate() const {
    detail::require_kappa("kappa1", kappa1);
    detail::require_kappa("kappa2", kappa2);
    detail::require_open_alpha(alpha);
    if (!(dt > 0.0)) throw DomainError("dt must be positive");
    if (!(horizon > dt)) throw DomainError("horizon must exceed dt");
    if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
    if (!x0.allFinite()) throw DomainError("x0 must be finite");
    if (x0.x() == 0.0 && x0.y() == 0.0) {
      throw DomainError("start point must differ from (0, 0)");
    }
  }

  std::uint64_t steps() const {
    return static_cast<std::uint64_t>(std::llround(horizon / dt));
  }
};

struct PathResult {
  double dt = 0.0;
  double epsilon = 0.0;
  std::vector<double> times;
  std::vector<double> x1;
  std::vector<double> x2;
  double local_time_1 = 0.0;
  double local_time_2 = 0.0;
  /// First grid time with max(|x1|, |x2|) <= delta, for the single delta.
  std::optional<double> joint_hit_time;
  /// Same, one entry per requested delta.
  std::vector<std::optional<double>> joint_hit_times;
  std::uint64_t crossings_1 = 0;
  std::uint64_t crossings_2 = 0;
  std::uint64_t steps_taken = 0;
  Eigen::Vector2d final_state{0.0, 0.0};
};

struct PathOptions {
  std::vector<double> deltas;
  bool record = true;
  /// Stop as soon as every delta has been hit (recorded arrays are cut there).
  bool stop_when_all_hit = false;
};

/// Probability that a Brownian bridge from x to y over time dt touches 0.
inline double bridge_zero_crossing_prob(double x, double y, double dt) {
  if (x * y <= 0.0) return 1.0;
  return std::exp(-2.0 * x * y / dt);
}

struct SkewStep {
  double next = 0.0;
  bool crossed = false;
  double local_time_increment = 0.0;
};

/**
 * One step of a skew Brownian coordinate.
 *
 * u_cross decides the zero visit (u_cross < bridge probability), u_side the
 * exit side (positive iff u_side < (1 + kappa)/2). The local-time increment
 * is the occupation contribution dt 1[|x| <= bandwidth] / (2 bandwidth) of
 * the left endpoint.
 */
inline SkewStep skew_step(double x, double kappa, double increment, double dt,
                          double u_cross, double u_side, double bandwidth) {
  SkewStep s;
  const double y = x + increment;
  s.local_time_increment = std::abs(x) <= bandwidth ? dt / (2.0 * bandwidth) : 0.0;
  if (u_cross < bridge_zero_crossing_prob(x, y, dt)) {
    s.crossed = true;
    const double magnitude = std::abs(y);
    s.next = u_side < 0.5 * (1.0 + kappa) ? magnitude : -magnitude;
  } else {
    s.next = y;
  }
  return s;
}

namespace detail {

// exp(-24) is below the smallest uniform_open() value 2^-33, so a bridge with
// 2xy/dt above this exponent can never register a zero visit. Skipping the
// decision draws there leaves every path bit-identical.
inline constexpr double kNoVisitExponent = 24.0;

inline bool visit_possible(double x, double y, double dt) {
  const double prod = x * y;
  return prod <= 0.0 || 2.0 * prod / dt < kNoVisitExponent;
}

inline constexpr std::uint32_t kNoiseLane = 0;
inline constexpr std::uint32_t kDecisionLane = 1;

}  // namespace detail

/// Gaussian pairs with covariance dt [[1, alpha], [alpha, 1]], step index 0..count-1.
inline std::vector<Eigen::Vector2d> correlated_increments(double alpha, double dt,
                                                          std::uint64_t count,
                                                          const TrialStream& stream) {
  detail::require_open_alpha(alpha);
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  const double sdt = std::sqrt(dt);
  const double tail = std::sqrt((1.0 - alpha) * (1.0 + alpha));
  std::vector<Eigen::Vector2d> out(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto [z1, z2] = stream.normals(i, detail::kNoiseLane);
    out[i] = {sdt * z1, sdt * (alpha * z1 + tail * z2)};
  }
  return out;
}

/**
 * Simulates the pair on the grid t_i = i dt, i = 0..round(horizon/dt).
 * Both coordinates share the correlated increments; their zero visits and
 * exit sides are resolved with independent uniforms.
 */
inline PathResult simulate_pair(const SimParams& params, const PathOptions& options) {
  params.validate();
  for (double d : options.deltas) {
    if (!(d >= 0.0)) throw DomainError("delta must be non-negative");
  }
  const TrialStream stream(params.seed, params.trial_index);
  const std::uint64_t n = params.steps();
  const double dt = params.dt;
  const double sdt = std::sqrt(dt);
  const double tail = std::sqrt((1.0 - params.alpha) * (1.0 + params.alpha));
  const double eps = params.epsilon;

  PathResult r;
  r.dt = dt;
  r.epsilon = eps;
  r.joint_hit_times.assign(options.deltas.size(), std::nullopt);
  if (options.record) {
    r.times.reserve(n + 1);
    r.x1.reserve(n + 1);
    r.x2.reserve(n + 1);
  }

  double x1 = params.x0.x();
  double x2 = params.x0.y();
  std::size_t pending = options.deltas.size();

  auto observe = [&](std::uint64_t i) {
    const double t = static_cast<double>(i) * dt;
    if (options.record) {
      r.times.push_back(t);
      r.x1.push_back(x1);
      r.x2.push_back(x2);
    }
    if (pending == 0) return;
    const double radius = std::max(std::abs(x1), std::abs(x2));
    for (std::size_t j = 0; j < options.deltas.size(); ++j) {
      if (!r.joint_hit_times[j] && radius <= options.deltas[j]) {
        r.joint_hit_times[j] = t;
        --pending;
      }
    }
  };

  observe(0);
  std::uint64_t i = 0;
  for (; i < n; ++i) {
    if (options.stop_when_all_hit && pending == 0 && !options.deltas.empty()) break;
    const auto [z1, z2] = stream.normals(i, detail::kNoiseLane);
    const double dw1 = sdt * z1;
    const double dw2 = sdt * (params.alpha * z1 + tail * z2);

    double uc1 = 1.0, uc2 = 1.0, us1 = 1.0, us2 = 1.0;
    if (detail::visit_possible(x1, x1 + dw1, dt) ||
        detail::visit_possible(x2, x2 + dw2, dt)) {
      const auto u = stream.uniforms(i, detail::kDecisionLane);
      uc1 = u[0];
      uc2 = u[1];
      us1 = u[2];
      us2 = u[3];
    }
    const SkewStep s1 = skew_step(x1, params.kappa1, dw1, dt, uc1, us1, eps);
    const SkewStep s2 = skew_step(x2, params.kappa2, dw2, dt, uc2, us2, eps);
    r.local_time_1 += s1.local_time_increment;
    r.local_time_2 += s2.local_time_increment;
    r.crossings_1 += s1.crossed ? 1 : 0;
    r.crossings_2 += s2.crossed ? 1 : 0;
    x1 = s1.next;
    x2 = s2.next;
    observe(i + 1);
  }
  r.steps_taken = i;
  r.final_state = {x1, x2};
  if (options.deltas.size() == 1) r.joint_hit_time = r.joint_hit_times.front();
  return r;
}

/// Single-delta convenience form; delta may be +infinity.
inline PathResult simulate_pair(const SimParams& params, double delta) {
  PathOptions options;
  options.deltas = {delta};
  return simulate_pair(params, options);
}

struct LocalTimeEstimate {
  double L1 = 0.0;
  double L2 = 0.0;
  /// Bandwidth below 3 sqrt(dt): the grid cannot resolve the occupation well.
  bool under_resolved = false;
};

/// (1 / 2 eps) sum_i dt 1[|x(t_i)| <= eps] over the left grid points.
inline LocalTimeEstimate local_time_estimate(const PathResult& path, double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
  if (path.x1.empty()) {
    throw std::invalid_argument("local_time_estimate needs a recorded path");
  }
  LocalTimeEstimate est;
  const double weight = path.dt / (2.0 * epsilon);
  for (std::size_t i = 0; i + 1 < path.x1.size(); ++i) {
    if (std::abs(path.x1[i]) <= epsilon) est.L1 += weight;
    if (std::abs(path.x2[i]) <= epsilon) est.L2 += weight;
  }
  est.under_resolved = epsilon < 3.0 * std::sqrt(path.dt);
  return est;
}

struct SingleSkewPath {
  double final_value = 0.0;
  double local_time = 0.0;
  std::uint64_t crossings = 0;
  /// Lowest value seen after the first zero visit (+inf if none).
  double min_after_visit = std::numeric_limits<double>::infinity();
};

/**
 * One skew coordinate run alone over [0, horizon] from x0, drawing from the
 * first-coordinate slots of the trial stream.
 */
inline SingleSkewPath simulate_single(double kappa, double x0, double horizon,
                                      double dt, double bandwidth,
                                      const TrialStream& stream) {
  detail::require_kappa("kappa", kappa);
  if (!(dt > 0.0) || !(horizon > 0.0)) {
    throw DomainError("dt and horizon must be positive");
  }
  const std::uint64_t n = static_cast<std::uint64_t>(std::llround(horizon / dt));
  const double sdt = std::sqrt(dt);
  SingleSkewPath out;
  double x = x0;
  bool visited = false;
  for (std::uint64_t i = 0; i < n; ++i) {
    const double dw = sdt * stream.normals(i, detail::kNoiseLane).first;
    double uc = 1.0, us = 1.0;
    if (detail::visit_possible(x, x + dw, dt)) {
      const auto u = stream.uniforms(i, detail::kDecisionLane);
      uc = u[0];
      us = u[2];
    }
    const SkewStep s = skew_step(x, kappa, dw, dt, uc, us, bandwidth);
    out.local_time += s.local_time_increment;
    if (s.crossed) {
      ++out.crossings;
      visited = true;
    }
    x = s.next;
    if (visited) out.min_after_visit = std::min(out.min_after_visit, x);
  }
  out.final_value = x;
  return out;
}

}  // namespace skewmeet
