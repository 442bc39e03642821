#pragma once
/**
 * @file criterion.hpp
 * @brief Origin-hitting criterion for a planar Wiener process with membranes
 *        on n rays, and its specialization to the correlated skew pair.
 *
 * The visited-ray sequence is a Markov chain on {0..n-1} that moves from ray
 * k to k+1 with probability p_k and to k-1 with probability q_k. With its
 * stationary law pi, the sign of
 *
 *   S = sum_k gamma_k pi_k xi_{k-1} xi_k / den_k * tan(theta_k),
 *   den_k = (xi_{k-1} + xi_k) + gamma_k (xi_{k-1} - xi_k),
 *
 * decides the zero-one law: S > 0 hits the origin a.s., S <= 0 never does.
 */

#include "skewmeet/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace skewmeet {

class DegenerateDenominator : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The chain has more than one closed class, so pi is not unique.
class NonUniqueStationary : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Verdict { HitsAlmostSurely, DoesNotHit };
enum class SolveMethod { ClosedForm, LinearSolve, SpecialCase };

inline std::string_view to_string(Verdict v) {
  return v == Verdict::HitsAlmostSurely ? "HIT" : "NO-HIT";
}

inline std::string_view to_string(SolveMethod m) {
  switch (m) {
    case SolveMethod::ClosedForm: return "closed-form";
    case SolveMethod::LinearSolve: return "linear-solve";
    case SolveMethod::SpecialCase: return "special-case";
  }
  return "unknown";
}

struct TransitionProbabilities {
  std::vector<double> p;  ///< ray k -> k+1
  std::vector<double> q;  ///< ray k -> k-1
};

struct ChainSolution {
  std::vector<double> p_tilde;
  std::vector<double> q_tilde;
  std::vector<double> pi;
  double S = 0.0;
  Verdict verdict = Verdict::DoesNotHit;
  std::optional<double> D;
  SolveMethod method = SolveMethod::LinearSolve;
};

inline constexpr double kDenominatorFloor = 1e-14;

namespace detail {

inline double ray_denominator(const RayConfig& cfg, std::size_t k) {
  const double before = cfg.gap_before(k);
  const double after = cfg.gap_after(k);
  const double den = (before + after) + cfg.gamma[k] * (before - after);
  if (!(den > kDenominatorFloor)) {
    throw DegenerateDenominator("transition denominator of ray " +
                                std::to_string(k) + " is not positive");
  }
  return den;
}

inline void require_interior_nonzero(const char* name, double kappa) {
  if (!(std::abs(kappa) < 1.0) || kappa == 0.0) {
    throw DomainError(std::string(name) +
                      " must lie in (-1, 1) and be non-zero for the closed form");
  }
}

}  // namespace detail

inline TransitionProbabilities transition_probabilities(const RayConfig& cfg) {
  const std::size_t n = cfg.size();
  TransitionProbabilities t;
  t.p.resize(n);
  t.q.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double den = detail::ray_denominator(cfg, k);
    t.p[k] = (1.0 + cfg.gamma[k]) * cfg.gap_before(k) / den;
    t.q[k] = (1.0 - cfg.gamma[k]) * cfg.gap_after(k) / den;
  }
  return t;
}

/// Dense cyclic transition matrix; for n = 2 both moves land on the other ray.
inline Eigen::MatrixXd transition_matrix(std::span<const double> p,
                                         std::span<const double> q) {
  const auto n = static_cast<Eigen::Index>(p.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    m(k, (k + 1) % n) += p[static_cast<std::size_t>(k)];
    m(k, (k + n - 1) % n) += q[static_cast<std::size_t>(k)];
  }
  return m;
}

/// Number of closed communicating classes of the support graph of m.
inline std::size_t count_closed_classes(const Eigen::MatrixXd& m) {
  const auto n = static_cast<std::size_t>(m.rows());
  std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    reach[i][i] = 1;
    for (std::size_t j = 0; j < n; ++j) {
      if (m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > 0.0) {
        reach[i][j] = 1;
      }
    }
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      if (reach[i][k])
        for (std::size_t j = 0; j < n; ++j)
          if (reach[k][j]) reach[i][j] = 1;

  // i is in a closed class iff every state reachable from i reaches back.
  std::vector<char> seen(n, 0);
  std::size_t classes = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (seen[i]) continue;
    bool closed = true;
    for (std::size_t j = 0; j < n && closed; ++j) {
      if (reach[i][j] && !reach[j][i]) closed = false;
    }
    if (!closed) continue;
    ++classes;
    for (std::size_t j = 0; j < n; ++j) {
      if (reach[i][j]) seen[j] = 1;
    }
  }
  return classes;
}

/**
 * Solves pi P = pi, sum(pi) = 1 by a direct dense solve.
 * Throws NonUniqueStationary when the support graph has several closed classes.
 */
inline std::vector<double> stationary_distribution(std::span<const double> p,
                                                   std::span<const double> q) {
  if (p.size() != q.size() || p.size() < 2) {
    throw std::invalid_argument("transition vectors must have equal size >= 2");
  }
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] < 0.0 || q[k] < 0.0 || std::abs(p[k] + q[k] - 1.0) > kIdentityTol) {
      throw std::invalid_argument("row " + std::to_string(k) +
                                  " is not a probability vector");
    }
  }
  const Eigen::MatrixXd m = transition_matrix(p, q);
  if (count_closed_classes(m) != 1) {
    throw NonUniqueStationary(
        "chain has several closed classes; stationary law is not unique");
  }
  const auto n = m.rows();
  Eigen::MatrixXd system = m.transpose() - Eigen::MatrixXd::Identity(n, n);
  system.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  const Eigen::VectorXd sol = system.fullPivLu().solve(rhs);

  std::vector<double> pi(static_cast<std::size_t>(n));
  double total = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    pi[static_cast<std::size_t>(k)] = std::max(0.0, sol(k));
    total += pi[static_cast<std::size_t>(k)];
  }
  for (double& x : pi) x /= total;
  return pi;
}

struct FourRayClosedForm {
  std::array<double, 4> pi{};
  double D = 0.0;
};

/**
 * Explicit stationary law of the four-ray chain with gamma1 = kappa1,
 * gamma2 = -kappa2 and gaps (xi, pi-xi, xi, pi-xi).
 *
 * D = 2[(1 + g1 g2) xi + (1 - g1 g2)(pi - xi)]; the four numerators below
 * add up to 2D, hence the extra factor 2 in the normalization.
 */
inline FourRayClosedForm closed_form_pi_four_ray(double kappa1, double kappa2,
                                                 double xi) {
  detail::require_interior_nonzero("kappa1", kappa1);
  detail::require_interior_nonzero("kappa2", kappa2);
  if (!(xi > 0.0 && xi < std::numbers::pi)) {
    throw DomainError("xi must lie in (0, pi)");
  }
  const double g1 = kappa1;
  const double g2 = -kappa2;
  const double wide = std::numbers::pi - xi;
  FourRayClosedForm out;
  out.D = 2.0 * ((1.0 + g1 * g2) * xi + (1.0 - g1 * g2) * wide);
  const double norm = 2.0 * out.D;
  out.pi[0] = (1.0 - g2) * ((1.0 + g1) * wide + (1.0 - g1) * xi) / norm;
  out.pi[1] = (1.0 + g1) * ((1.0 - g2) * wide + (1.0 + g2) * xi) / norm;
  out.pi[2] = (1.0 + g2) * ((1.0 - g1) * wide + (1.0 + g1) * xi) / norm;
  out.pi[3] = (1.0 - g1) * ((1.0 + g2) * wide + (1.0 - g2) * xi) / norm;
  return out;
}

inline double statistic_S(const RayConfig& cfg, std::span<const double> pi) {
  if (pi.size() != cfg.size()) {
    throw std::invalid_argument("stationary vector size does not match ray count");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < cfg.size(); ++k) {
    const double den = detail::ray_denominator(cfg, k);
    s += cfg.gamma[k] * pi[k] * cfg.gap_before(k) * cfg.gap_after(k) / den *
         std::tan(cfg.theta[k]);
  }
  return s;
}

/// S = 2 xi (pi - xi) / D * (-k1 k2 cot xi), cot xi = -alpha / sqrt(1 - alpha^2).
inline double closed_form_S_four_ray(double kappa1, double kappa2, double alpha) {
  detail::require_interior_nonzero("kappa1", kappa1);
  detail::require_interior_nonzero("kappa2", kappa2);
  const double xi = membrane_angle(alpha);
  const double g1g2 = -kappa1 * kappa2;
  const double D = 2.0 * ((1.0 + g1g2) * xi + (1.0 - g1g2) * (std::numbers::pi - xi));
  const double cot_xi = -alpha / std::sqrt((1.0 - alpha) * (1.0 + alpha));
  return 2.0 * xi * (std::numbers::pi - xi) / D * (-kappa1 * kappa2 * cot_xi);
}

/// S = 0 belongs to the no-hit branch.
inline Verdict verdict(double S) {
  return S > 0.0 ? Verdict::HitsAlmostSurely : Verdict::DoesNotHit;
}

inline Verdict theorem_decision(double kappa1, double kappa2, double alpha) {
  detail::require_kappa("kappa1", kappa1);
  detail::require_kappa("kappa2", kappa2);
  detail::require_open_alpha(alpha);
  return kappa1 * kappa2 * alpha > 0.0 ? Verdict::HitsAlmostSurely
                                       : Verdict::DoesNotHit;
}

/// Transition probabilities, linear-solve stationary law, S and verdict.
inline ChainSolution solve_chain(const RayConfig& cfg) {
  ChainSolution sol;
  auto t = transition_probabilities(cfg);
  sol.pi = stationary_distribution(t.p, t.q);
  sol.p_tilde = std::move(t.p);
  sol.q_tilde = std::move(t.q);
  sol.S = statistic_S(cfg, sol.pi);
  sol.verdict = verdict(sol.S);
  sol.method = SolveMethod::LinearSolve;
  return sol;
}

namespace detail {

inline bool is_special_pair(double kappa1, double kappa2) {
  return kappa1 == 0.0 || kappa2 == 0.0 || std::abs(kappa1) == 1.0 ||
         std::abs(kappa2) == 1.0;
}

/**
 * Stationary law when a boundary permeability blocks some moves: the closed
 * class is a path on the cycle, and detailed balance along it gives
 * pi_{k+1} / pi_k = p_k / q_{k+1}.
 */
inline std::vector<double> blocked_cycle_pi(const TransitionProbabilities& t) {
  const std::size_t n = t.p.size();
  // Locate a state from which the path starts: its clockwise move is blocked
  // and it is recurrent (reached from its anticlockwise neighbour).
  std::optional<std::size_t> start;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t next = (k + 1) % n;
    if (t.q[k] == 0.0 && t.p[k] > 0.0 && t.q[next] > 0.0) {
      start = k;
      break;
    }
  }
  if (!start) {
    throw NonUniqueStationary("no blocked path found in the ray chain");
  }
  std::vector<double> pi(n, 0.0);
  std::size_t k = *start;
  pi[k] = 1.0;
  for (std::size_t steps = 1; steps < n; ++steps) {
    const std::size_t next = (k + 1) % n;
    if (t.p[k] == 0.0 || t.q[next] == 0.0) break;
    pi[next] = pi[k] * t.p[k] / t.q[next];
    k = next;
  }
  double total = 0.0;
  for (double x : pi) total += x;
  for (double& x : pi) x /= total;
  const Eigen::MatrixXd m = transition_matrix(t.p, t.q);
  const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(pi.data(), n);
  if ((m.transpose() * v - v).lpNorm<Eigen::Infinity>() > 1e-12) {
    throw NonUniqueStationary("blocked path law is not stationary");
  }
  return pi;
}

/// Two-ray fan left after dropping the membrane-free half-lines.
inline RayConfig reduced_membrane_config(const RayConfig& full, bool keep_odd) {
  const std::size_t first = keep_odd ? 1 : 0;
  return make_ray_config(full.phi[first], {std::numbers::pi, std::numbers::pi},
                         {full.gamma[first], full.gamma[first + 2]},
                         {full.theta[first], full.theta[first + 2]},
                         "membrane rays only");
}

}  // namespace detail

/**
 * Explicit stationary laws at the boundary of the permeability square.
 *
 * kappa1 = 0 (kappa2 = 0): rays 1,3 (2,4) carry no membrane, the chain lives
 * on the remaining opposite rays and pi = (0, 1/2, 0, 1/2) ((1/2, 0, 1/2, 0)).
 * |kappa| = 1: closed path of the blocked chain, e.g. (1/2, 1/2, 0, 0) for
 * kappa1 = kappa2 = 1 and (q2/2, 1/2, p2/2, 0) for kappa1 = 1.
 */
inline std::array<double, 4> special_case_pi(double kappa1, double kappa2,
                                             double alpha) {
  detail::require_kappa("kappa1", kappa1);
  detail::require_kappa("kappa2", kappa2);
  detail::require_open_alpha(alpha);
  if (!detail::is_special_pair(kappa1, kappa2)) {
    throw std::invalid_argument(
        "special_case_pi needs a zero or unit-modulus permeability");
  }
  if (kappa1 == 0.0 && kappa2 == 0.0) {
    // No membranes at all; the plain four-ray chain is irreducible.
    const auto t = transition_probabilities(build_four_ray_config(0.0, 0.0, alpha));
    const auto pi = stationary_distribution(t.p, t.q);
    return {pi[0], pi[1], pi[2], pi[3]};
  }
  if (kappa1 == 0.0) return {0.0, 0.5, 0.0, 0.5};
  if (kappa2 == 0.0) return {0.5, 0.0, 0.5, 0.0};
  const auto t = transition_probabilities(build_four_ray_config(kappa1, kappa2, alpha));
  const auto pi = detail::blocked_cycle_pi(t);
  return {pi[0], pi[1], pi[2], pi[3]};
}

/**
 * Full analysis of the correlated pair: closed form in the interior,
 * explicit special cases on the boundary.
 */
inline ChainSolution analyze_four_ray(double kappa1, double kappa2, double alpha) {
  const RayConfig cfg = build_four_ray_config(kappa1, kappa2, alpha);
  auto t = transition_probabilities(cfg);
  ChainSolution sol;
  sol.p_tilde = t.p;
  sol.q_tilde = t.q;
  if (!detail::is_special_pair(kappa1, kappa2)) {
    const auto cf = closed_form_pi_four_ray(kappa1, kappa2, membrane_angle(alpha));
    sol.pi.assign(cf.pi.begin(), cf.pi.end());
    sol.D = cf.D;
    sol.S = closed_form_S_four_ray(kappa1, kappa2, alpha);
    sol.method = SolveMethod::ClosedForm;
  } else {
    const auto pi = special_case_pi(kappa1, kappa2, alpha);
    sol.pi.assign(pi.begin(), pi.end());
    if ((kappa1 == 0.0) != (kappa2 == 0.0)) {
      const RayConfig reduced = detail::reduced_membrane_config(cfg, kappa1 == 0.0);
      const double half[2] = {0.5, 0.5};
      sol.S = statistic_S(reduced, half);
    } else {
      sol.S = statistic_S(cfg, sol.pi);
    }
    sol.method = SolveMethod::SpecialCase;
  }
  sol.verdict = verdict(sol.S);
  return sol;
}

}  // namespace skewmeet
