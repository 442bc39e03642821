#pragma once
/**
 * @file geometry.hpp
 * @brief Correlation model, whitening transform and membrane ray layouts.
 *
 * The pair (x1, x2) is driven by a Wiener process with covariance
 * B = [[1, alpha], [alpha, 1]] t. The symmetric map A = B^{-1/2} whitens the
 * noise and sends the two coordinate axes (the membranes) to four rays from
 * the origin. RayConfig describes such a fan of rays for any n.
 */

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace skewmeet {

/// Raised when an input lies outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Absolute tolerance for unit-scale identities (radicals and trig only).
inline constexpr double kIdentityTol = 1e-12;

namespace detail {

inline void require_open_alpha(double alpha) {
  if (!(std::abs(alpha) < 1.0)) {
    throw DomainError("alpha must lie in the open interval (-1, 1), got " +
                      std::to_string(alpha));
  }
}

inline void require_kappa(const char* name, double kappa) {
  if (!(std::abs(kappa) <= 1.0)) {
    throw DomainError(std::string(name) +
                      " must lie in the closed interval [-1, 1], got " +
                      std::to_string(kappa));
  }
}

}  // namespace detail

/// Correlation alpha together with B and the coefficients of A = B^{-1/2}.
struct CorrelationModel {
  double alpha = 0.0;
  double a = 2.0;
  double b = 0.0;
  double c = 2.0;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Identity();

  /// A = (1/c) [[a, b], [b, a]].
  Eigen::Matrix2d whitening() const {
    Eigen::Matrix2d m;
    m << a, b, b, a;
    return m / c;
  }

  /// B^{1/2} = A^{-1}.
  Eigen::Matrix2d coloring() const {
    // B^{1/2} = (1/2) [[s+, s-], [s-, s+]] with s+- = sqrt(1+a) +- sqrt(1-a).
    const double sp = std::sqrt(1.0 + alpha);
    const double sm = std::sqrt(1.0 - alpha);
    Eigen::Matrix2d m;
    m << sp + sm, sp - sm, sp - sm, sp + sm;
    return m / 2.0;
  }
};

inline CorrelationModel build_correlation_model(double alpha) {
  detail::require_open_alpha(alpha);
  const double sm = std::sqrt(1.0 - alpha);
  const double sp = std::sqrt(1.0 + alpha);
  CorrelationModel m;
  m.alpha = alpha;
  m.a = sm + sp;
  m.b = sm - sp;
  m.c = 2.0 * std::sqrt((1.0 - alpha) * (1.0 + alpha));
  m.covariance << 1.0, alpha, alpha, 1.0;
  return m;
}

/// Angle between the images of the two membrane normals: xi = arccos(-alpha).
inline double membrane_angle(double alpha) {
  detail::require_open_alpha(alpha);
  return std::acos(-alpha);
}

inline Eigen::Vector2d apply_whitening(const CorrelationModel& model,
                                       const Eigen::Vector2d& point) {
  return model.whitening() * point;
}

/**
 * n rays c_k from the origin, ordered anticlockwise.
 *
 * Gap xi[k] is the angle from ray k to ray k+1 (cyclically), so the ray k
 * sits between xi[k-1] on its clockwise side and xi[k] on its anticlockwise
 * side. v[k] is the oblique push direction of the membrane on ray k,
 * normalized so that (v[k], n_k) = 1 for the anticlockwise unit normal n_k;
 * theta[k] is positive iff v[k] leans towards the origin.
 */
struct RayConfig {
  std::vector<double> phi;
  std::vector<double> xi;
  std::vector<double> gamma;
  std::vector<double> theta;
  std::vector<Eigen::Vector2d> v;
  std::string origin_label;

  std::size_t size() const { return phi.size(); }

  double gap_before(std::size_t k) const {
    return xi[(k + xi.size() - 1) % xi.size()];
  }
  double gap_after(std::size_t k) const { return xi[k]; }

  Eigen::Vector2d direction(std::size_t k) const {
    return {std::cos(phi[k]), std::sin(phi[k])};
  }
  Eigen::Vector2d normal(std::size_t k) const {
    return {-std::sin(phi[k]), std::cos(phi[k])};
  }

  /// Throws DomainError if a structural invariant is broken.
  void validate() const {
    const std::size_t n = phi.size();
    if (n < 2 || xi.size() != n || gamma.size() != n || theta.size() != n ||
        v.size() != n) {
      throw DomainError("ray config needs n >= 2 rays with matching field sizes");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (!(xi[k] > 0.0) || xi[k] > std::numbers::pi + kIdentityTol) {
        throw DomainError("ray gap xi[" + std::to_string(k) +
                          "] must lie in (0, pi]");
      }
      total += xi[k];
      if (!(std::abs(gamma[k]) <= 1.0)) {
        throw DomainError("permeability gamma[" + std::to_string(k) +
                          "] must lie in [-1, 1]");
      }
      if (!(std::abs(theta[k]) < std::numbers::pi / 2)) {
        throw DomainError("obliqueness theta[" + std::to_string(k) +
                          "] must lie in (-pi/2, pi/2)");
      }
      if (std::abs(v[k].dot(normal(k)) - 1.0) > 1e-9) {
        throw DomainError("direction v[" + std::to_string(k) +
                          "] must satisfy (v, n) = 1");
      }
    }
    if (std::abs(total - kTwoPi) > 1e-10) {
      throw DomainError("ray gaps must sum to 2*pi");
    }
  }
};

/**
 * Builds a fan from the angle of the first ray and the n gaps.
 * Directions follow from (v, n) = 1 and the obliqueness angle:
 * v_k = n_k - tan(theta_k) e_k with e_k the outward unit vector of ray k.
 */
inline RayConfig make_ray_config(double first_angle, std::vector<double> gaps,
                                 std::vector<double> gamma,
                                 std::vector<double> theta,
                                 std::string label = {}) {
  RayConfig cfg;
  const std::size_t n = gaps.size();
  cfg.phi.resize(n);
  double angle = first_angle;
  for (std::size_t k = 0; k < n; ++k) {
    cfg.phi[k] = std::fmod(std::fmod(angle, kTwoPi) + kTwoPi, kTwoPi);
    angle += gaps[k];
  }
  cfg.xi = std::move(gaps);
  cfg.gamma = std::move(gamma);
  cfg.theta = std::move(theta);
  cfg.origin_label = std::move(label);
  cfg.v.resize(n);
  if (cfg.theta.size() == n) {
    for (std::size_t k = 0; k < n; ++k) {
      cfg.v[k] = cfg.normal(k) - std::tan(cfg.theta[k]) * cfg.direction(k);
    }
  }
  cfg.validate();
  return cfg;
}

/**
 * Four-ray fan for the pair: rays are the images under A of the half-axes
 * [0,inf)x{0}, {0}x[0,inf), (-inf,0]x{0}, {0}x(-inf,0], anticlockwise.
 *
 * gaps (xi, pi-xi, xi, pi-xi), permeabilities (k1, -k2, -k1, k2),
 * obliqueness (xi-pi/2, pi/2-xi, xi-pi/2, pi/2-xi).
 */
inline RayConfig build_four_ray_config(double kappa1, double kappa2,
                                       double alpha) {
  detail::require_kappa("kappa1", kappa1);
  detail::require_kappa("kappa2", kappa2);
  const CorrelationModel model = build_correlation_model(alpha);
  const double xi = membrane_angle(alpha);
  // xi - pi/2 == asin(alpha); this form is exact at alpha = 0.
  const double tilt = std::asin(alpha);
  const double first = std::atan2(model.b, model.a);
  return make_ray_config(first, {xi, std::numbers::pi - xi, xi, std::numbers::pi - xi},
                         {kappa1, -kappa2, -kappa1, kappa2},
                         {tilt, -tilt, tilt, -tilt}, "four-ray image of the axes");
}

}  // namespace skewmeet
