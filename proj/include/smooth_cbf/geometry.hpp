#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "smooth_cbf/errors.hpp"

namespace smooth_cbf {

/// Barrier value h(x) together with its gradient dh/dx over the full state.
struct BarrierValue {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

namespace detail {

inline void require_planar_state(const Eigen::VectorXd& state, const char* who) {
  if (state.size() < 2) {
    throw ConfigError(std::string(who) + ": state dimension " +
                      std::to_string(state.size()) +
                      " is too small for a planar barrier (need >= 2)");
  }
}

}  // namespace detail

/// h(x) = 1 - (p - c)^T P (p - c) with P = diag(1 / a_i^2), p the planar
/// position (first two state entries). Remaining state entries (heading) get a
/// zero gradient.
class EllipsoidBarrier {
 public:
  EllipsoidBarrier(Eigen::Vector2d center, Eigen::Vector2d semi_axes)
      : center_(center), semi_axes_(semi_axes) {
    if (!(semi_axes_.array() > 0.0).all() || !semi_axes_.allFinite()) {
      throw ConfigError("ellipsoid semi-axes must be finite and strictly positive");
    }
    if (!center_.allFinite()) throw ConfigError("ellipsoid center must be finite");
  }

  [[nodiscard]] const Eigen::Vector2d& center() const { return center_; }
  [[nodiscard]] const Eigen::Vector2d& semi_axes() const { return semi_axes_; }

  [[nodiscard]] BarrierValue evaluate(const Eigen::VectorXd& state) const {
    detail::require_planar_state(state, "ellipsoid barrier");
    const Eigen::Vector2d weights = semi_axes_.array().square().inverse();
    const Eigen::Vector2d d = state.head<2>() - center_;
    BarrierValue out;
    out.value = 1.0 - d.dot(weights.cwiseProduct(d));
    out.gradient = Eigen::VectorXd::Zero(state.size());
    out.gradient.head<2>() = -2.0 * weights.cwiseProduct(d);
    return out;
  }

 private:
  Eigen::Vector2d center_;
  Eigen::Vector2d semi_axes_;
};

/// Obstacle complement barrier h(x) = ||diag(1/sigma) R(-theta) (p - c)||_p - offset.
///
/// Negative strictly inside the superellipse, zero on its boundary, positive
/// outside. The p-norm is C^1 away from the center for even p; at the center
/// itself the gradient is reported as zero.
class SuperellipseObstacleBarrier {
 public:
  SuperellipseObstacleBarrier(Eigen::Vector2d center, Eigen::Vector2d sigma, double rotation,
                              int exponent, double offset)
      : center_(center), sigma_(sigma), rotation_(rotation), exponent_(exponent), offset_(offset) {
    if (!(sigma_.array() > 0.0).all() || !sigma_.allFinite()) {
      throw ConfigError("superellipse sigma must be finite and strictly positive");
    }
    if (exponent_ < 2 || exponent_ % 2 != 0) {
      throw ConfigError("superellipse exponent must be an even integer >= 2");
    }
    if (!(offset_ > 0.0) || !std::isfinite(offset_)) {
      throw ConfigError("superellipse offset must be finite and positive");
    }
    if (!center_.allFinite() || !std::isfinite(rotation_)) {
      throw ConfigError("superellipse center and rotation must be finite");
    }
  }

  [[nodiscard]] const Eigen::Vector2d& center() const { return center_; }
  [[nodiscard]] const Eigen::Vector2d& sigma() const { return sigma_; }
  [[nodiscard]] double rotation() const { return rotation_; }
  [[nodiscard]] int exponent() const { return exponent_; }
  [[nodiscard]] double offset() const { return offset_; }

  /// Coordinates in the obstacle's scaled body frame.
  [[nodiscard]] Eigen::Vector2d body_coordinates(const Eigen::Vector2d& position) const {
    return (inverse_rotation() * (position - center_)).cwiseQuotient(sigma_);
  }

  [[nodiscard]] BarrierValue evaluate(const Eigen::VectorXd& state) const {
    detail::require_planar_state(state, "superellipse barrier");
    const Eigen::Vector2d z = body_coordinates(state.head<2>());
    BarrierValue out;
    out.gradient = Eigen::VectorXd::Zero(state.size());

    const double scale = z.cwiseAbs().maxCoeff();
    if (scale == 0.0) {
      out.value = -offset_;
      return out;
    }
    // ||z||_p = scale * ||z / scale||_p keeps the powers in [0, 1].
    const Eigen::Vector2d w = z / scale;
    double sum = 0.0;
    for (int i = 0; i < 2; ++i) sum += std::pow(std::abs(w[i]), exponent_);
    const double unit_norm = std::pow(sum, 1.0 / exponent_);
    out.value = scale * unit_norm - offset_;

    // d||z||_p / dz_i = sign(z_i) |z_i|^(p-1) / ||z||_p^(p-1), scale-free in w.
    Eigen::Vector2d dz;
    for (int i = 0; i < 2; ++i) {
      dz[i] = std::copysign(std::pow(std::abs(w[i]), exponent_ - 1), w[i]) /
              std::pow(unit_norm, exponent_ - 1);
    }
    out.gradient.head<2>() = inverse_rotation().transpose() * dz.cwiseQuotient(sigma_);
    return out;
  }

 private:
  [[nodiscard]] Eigen::Matrix2d inverse_rotation() const {
    const double c = std::cos(rotation_);
    const double s = std::sin(rotation_);
    Eigen::Matrix2d r;
    r << c, s, -s, c;
    return r;
  }

  Eigen::Vector2d center_;
  Eigen::Vector2d sigma_;
  double rotation_;
  int exponent_;
  double offset_;
};

/// h(x) = w^T x + offset over the full state. Used for the line-reaching
/// convergence scenarios.
class AffineBarrier {
 public:
  AffineBarrier(Eigen::VectorXd weights, double offset)
      : weights_(std::move(weights)), offset_(offset) {
    if (weights_.size() == 0 || !weights_.allFinite() || !std::isfinite(offset_)) {
      throw ConfigError("affine barrier needs finite, non-empty weights and a finite offset");
    }
  }

  [[nodiscard]] const Eigen::VectorXd& weights() const { return weights_; }
  [[nodiscard]] double offset() const { return offset_; }

  [[nodiscard]] BarrierValue evaluate(const Eigen::VectorXd& state) const {
    if (state.size() != weights_.size()) {
      throw ConfigError("affine barrier: state dimension " + std::to_string(state.size()) +
                        " does not match weight dimension " + std::to_string(weights_.size()));
    }
    return {weights_.dot(state) + offset_, weights_};
  }

 private:
  Eigen::VectorXd weights_;
  double offset_;
};

using Barrier = std::variant<EllipsoidBarrier, SuperellipseObstacleBarrier, AffineBarrier>;

inline BarrierValue eval(const Barrier& barrier, const Eigen::VectorXd& state) {
  return std::visit([&](const auto& b) { return b.evaluate(state); }, barrier);
}

/// Membership in the closed superlevel set {x : h(x) >= 0}.
inline bool in_superlevel_set(const Barrier& barrier, const Eigen::VectorXd& state) {
  return eval(barrier, state).value >= 0.0;
}

/// Log-sum-exp soft minimum -ln(sum_i exp(-v_i)), shifted by min(v).
inline double softmin(std::span<const double> values) {
  if (values.empty()) throw ConfigError("softmin of an empty set");
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericalError("softmin input is not finite");
  }
  const double lo = *std::min_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += std::exp(-(v - lo));
  return lo - std::log(sum);
}

}  // namespace smooth_cbf
