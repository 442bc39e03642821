#pragma once
/**
 * @file philox.hpp
 * @brief Counter-based Philox4x32-10 generator and keyed per-trial streams.
 *
 * A draw is a pure function of (key, counter), so any trial can be replayed
 * in isolation and results do not depend on how trials are scheduled.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace skewmeet {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

constexpr void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                       std::uint32_t& lo) {
  const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(prod >> 32);
  lo = static_cast<std::uint32_t>(prod);
}

}  // namespace detail

constexpr PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0 = 0, lo0 = 0, hi1 = 0, lo1 = 0;
    detail::mulhilo(detail::kPhiloxM0, ctr[0], hi0, lo0);
    detail::mulhilo(detail::kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += detail::kPhiloxW0;
    key[1] += detail::kPhiloxW1;
  }
  return ctr;
}

/// Uniform on the open interval (0, 1) from 32 random bits.
constexpr double uniform_open(std::uint32_t bits) {
  return (static_cast<double>(bits) + 0.5) * 0x1p-32;
}

/// Uniform on (0, 1) with 53-bit resolution from two words.
constexpr double uniform_open53(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits =
      ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  // The top value would round up to 1.0; clamp it to the largest double below 1.
  return std::min((static_cast<double>(bits) + 0.5) * 0x1p-53, 0x1.fffffffffffffp-1);
}

/// Box-Muller: two independent standard normals from two uniforms in (0,1).
inline std::pair<double, double> box_muller(double u1, double u2) {
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(angle), r * std::sin(angle)};
}

/**
 * Random stream of one trial: key = seed, counter = (step, lane, trial).
 *
 * Each (step, lane) cell yields four 32-bit words. Lanes separate the uses
 * within a step (Gaussian increments vs. decision uniforms).
 */
class TrialStream {
 public:
  TrialStream(std::uint64_t seed, std::uint64_t trial_index)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        trial_lo_(static_cast<std::uint32_t>(trial_index)),
        trial_hi_(static_cast<std::uint32_t>(trial_index >> 32)) {}

  PhiloxCounter block(std::uint64_t step, std::uint32_t lane) const {
    if (step > 0xFFFFFFFFull) {
      throw std::out_of_range("trial stream supports at most 2^32 steps");
    }
    return philox4x32_10(
        {static_cast<std::uint32_t>(step), lane, trial_lo_, trial_hi_}, key_);
  }

  /// Two standard normals for (step, lane), 53-bit uniforms underneath.
  std::pair<double, double> normals(std::uint64_t step, std::uint32_t lane) const {
    const auto w = block(step, lane);
    return box_muller(uniform_open53(w[0], w[1]), uniform_open53(w[2], w[3]));
  }

  /// Four uniforms on (0,1) for (step, lane).
  std::array<double, 4> uniforms(std::uint64_t step, std::uint32_t lane) const {
    const auto w = block(step, lane);
    return {uniform_open(w[0]), uniform_open(w[1]), uniform_open(w[2]),
            uniform_open(w[3])};
  }

 private:
  PhiloxKey key_;
  std::uint32_t trial_lo_;
  std::uint32_t trial_hi_;
};

}  // namespace skewmeet
