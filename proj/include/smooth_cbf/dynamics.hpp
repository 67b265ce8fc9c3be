#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "smooth_cbf/errors.hpp"

namespace smooth_cbf {

/// Wraps an angle into [-pi, pi).
inline double wrap_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double wrapped = std::fmod(angle + std::numbers::pi, two_pi);
  if (wrapped < 0.0) wrapped += two_pi;
  wrapped -= std::numbers::pi;
  // fmod can land exactly on +pi after the shift for inputs just below -pi.
  if (wrapped >= std::numbers::pi) wrapped -= two_pi;
  return wrapped;
}

/// x' = f(x) + g(x) u for one of the closed-form models below.
class ControlAffineSystem {
 public:
  enum class Model { kSingleIntegrator, kUnicycle };

  static ControlAffineSystem single_integrator(int dim = 2) {
    if (dim < 1) throw ConfigError("single integrator dimension must be positive");
    return ControlAffineSystem(Model::kSingleIntegrator, dim, dim);
  }

  /// State (x, y, phi), input (v, omega).
  static ControlAffineSystem unicycle() { return ControlAffineSystem(Model::kUnicycle, 3, 2); }

  [[nodiscard]] Model model() const { return model_; }
  [[nodiscard]] int state_dim() const { return state_dim_; }
  [[nodiscard]] int input_dim() const { return input_dim_; }

  /// Index of the heading component, if the model has one.
  [[nodiscard]] std::optional<int> angle_index() const {
    if (model_ == Model::kUnicycle) return 2;
    return std::nullopt;
  }

  [[nodiscard]] Eigen::VectorXd drift(const Eigen::VectorXd& state) const {
    check_state(state);
    return Eigen::VectorXd::Zero(state_dim_);
  }

  [[nodiscard]] Eigen::MatrixXd control_matrix(const Eigen::VectorXd& state) const {
    check_state(state);
    if (model_ == Model::kSingleIntegrator) return Eigen::MatrixXd::Identity(state_dim_, input_dim_);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(3, 2);
    g(0, 0) = std::cos(state[2]);
    g(1, 0) = std::sin(state[2]);
    g(2, 1) = 1.0;
    return g;
  }

  [[nodiscard]] Eigen::VectorXd vector_field(const Eigen::VectorXd& state,
                                             const Eigen::VectorXd& input) const {
    if (input.size() != input_dim_) {
      throw ConfigError("input dimension " + std::to_string(input.size()) + " != " +
                        std::to_string(input_dim_));
    }
    return drift(state) + control_matrix(state) * input;
  }

 private:
  ControlAffineSystem(Model model, int state_dim, int input_dim)
      : model_(model), state_dim_(state_dim), input_dim_(input_dim) {}

  void check_state(const Eigen::VectorXd& state) const {
    if (state.size() != state_dim_) {
      throw ConfigError("state dimension " + std::to_string(state.size()) + " != " +
                        std::to_string(state_dim_));
    }
  }

  Model model_;
  int state_dim_;
  int input_dim_;
};

inline ControlAffineSystem single_integrator(int dim = 2) {
  return ControlAffineSystem::single_integrator(dim);
}
inline ControlAffineSystem unicycle() { return ControlAffineSystem::unicycle(); }

enum class Integrator { kEuler, kRk4 };

/// One zero-order-hold step of length dt. Heading components are re-wrapped.
inline Eigen::VectorXd integrate(const ControlAffineSystem& system, const Eigen::VectorXd& state,
                                 const Eigen::VectorXd& input, double dt,
                                 Integrator method = Integrator::kRk4) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("integration step must be positive");
  if (!state.allFinite() || !input.allFinite()) {
    throw NumericalError("non-finite state or input passed to integrate");
  }
  const auto f = [&](const Eigen::VectorXd& x) { return system.vector_field(x, input); };

  Eigen::VectorXd next;
  if (method == Integrator::kEuler) {
    next = state + dt * f(state);
  } else {
    const Eigen::VectorXd k1 = f(state);
    const Eigen::VectorXd k2 = f(state + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = f(state + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = f(state + dt * k3);
    next = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  if (auto idx = system.angle_index()) next[*idx] = wrap_angle(next[*idx]);
  if (!next.allFinite()) throw NumericalError("integration produced a non-finite state");
  return next;
}

/// Look-ahead distance of the controlled off-center point.
struct NidConfig {
  double lookahead = 0.05;

  void validate() const {
    if (!(lookahead > 0.0) || !std::isfinite(lookahead)) {
      throw ConfigError("NID lookahead must be positive");
    }
  }
};

/// Point p = (x + l cos phi, y + l sin phi) driven by the NID map.
inline Eigen::Vector2d nid_point(const Eigen::VectorXd& unicycle_state, const NidConfig& cfg) {
  return {unicycle_state[0] + cfg.lookahead * std::cos(unicycle_state[2]),
          unicycle_state[1] + cfg.lookahead * std::sin(unicycle_state[2])};
}

/// Maps a planar velocity for the off-center point to (v, omega) so that
/// d/dt p equals the planar velocity exactly.
inline Eigen::Vector2d nid_to_unicycle(const Eigen::Vector2d& planar_velocity, double phi,
                                       const NidConfig& cfg) {
  cfg.validate();
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  return {c * planar_velocity[0] + s * planar_velocity[1],
          (-s * planar_velocity[0] + c * planar_velocity[1]) / cfg.lookahead};
}

}  // namespace smooth_cbf
