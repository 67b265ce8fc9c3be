#pragma once

#include <cmath>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "smooth_cbf/dynamics.hpp"
#include "smooth_cbf/errors.hpp"
#include "smooth_cbf/geometry.hpp"
#include "smooth_cbf/qp.hpp"

namespace smooth_cbf {

/// mu(h) = gamma * h^q with q odd (q = 1 linear, q = 3 cubic).
class ClassKappa {
 public:
  static ClassKappa linear(double gamma) { return ClassKappa(gamma, 1); }
  static ClassKappa cubic(double gamma) { return ClassKappa(gamma, 3); }
  static ClassKappa odd_power(double gamma, int exponent) { return ClassKappa(gamma, exponent); }

  [[nodiscard]] double gamma() const { return gamma_; }
  [[nodiscard]] int exponent() const { return exponent_; }

  [[nodiscard]] double operator()(double h) const { return gamma_ * std::pow(h, exponent_); }

 private:
  ClassKappa(double gamma, int exponent) : gamma_(gamma), exponent_(exponent) {
    if (!(gamma_ > 0.0) || !std::isfinite(gamma_)) throw ConfigError("class-kappa gain must be positive");
    if (exponent_ < 1 || exponent_ % 2 == 0) throw ConfigError("class-kappa exponent must be odd and >= 1");
  }

  double gamma_;
  int exponent_;
};

struct FcbfParams {
  double gamma = 1.0;
  double rho = 0.5;

  void validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("FCBF gamma must be positive");
    if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("FCBF rho must lie in [0, 1)");
  }

  /// gamma * sign(h) * |h|^rho, with sign(0) = 0.
  [[nodiscard]] double forcing(double h) const {
    if (h == 0.0) return 0.0;
    return gamma * std::copysign(std::pow(std::abs(h), rho), h);
  }
};

/// Which indices the composite row's soft minimum runs over.
enum class SoftminIndexSet {
  kAll,         ///< i = 1..m, inactive barriers contribute exp(0) = 1 each
  kActiveOnly,  ///< {i : alpha_i > 0}
};

struct CompositeContext {
  std::span<const Barrier> barriers;
  Eigen::VectorXd alpha;
  Eigen::VectorXd alpha_dot;
  double gamma = 1.0;
  SoftminIndexSet index_set = SoftminIndexSet::kAll;

  void validate() const {
    const auto m = static_cast<Eigen::Index>(barriers.size());
    if (m == 0) throw ConfigError("composite row needs at least one barrier");
    if (alpha.size() != m || alpha_dot.size() != m) {
      throw ConfigError("alpha and alpha_dot must have one entry per barrier");
    }
    if (!alpha.allFinite() || !alpha_dot.allFinite()) throw NumericalError("alpha is not finite");
    if ((alpha.array() < 0.0).any() || (alpha.array() > 1.0).any()) {
      throw ConfigError("alpha entries must lie in [0, 1]");
    }
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("composite gamma must be positive");
  }
};

/// L_f h and L_g h at a state.
struct LieDerivatives {
  double value = 0.0;
  double lf = 0.0;
  Eigen::VectorXd lg;
};

inline LieDerivatives lie_derivatives(const Barrier& barrier, const ControlAffineSystem& system,
                                      const Eigen::VectorXd& state) {
  const BarrierValue hv = eval(barrier, state);
  if (hv.gradient.size() != system.state_dim()) {
    throw ConfigError("barrier gradient length does not match the system state dimension");
  }
  return {hv.value, hv.gradient.dot(system.drift(state)),
          system.control_matrix(state).transpose() * hv.gradient};
}

/// Finite-time row: L_g h u >= -L_f h - gamma sign(h) |h|^rho.
inline HalfplaneConstraint fcbf_row(const Barrier& barrier, const ControlAffineSystem& system,
                                    const Eigen::VectorXd& state, const FcbfParams& params,
                                    std::string label = "fcbf") {
  params.validate();
  const LieDerivatives d = lie_derivatives(barrier, system, state);
  return {d.lg, -d.lf - params.forcing(d.value), std::move(label)};
}

/// Zeroing (invariance) row: L_g h u >= -L_f h - mu(h). `mu` is any
/// double -> double class-kappa function; ClassKappa is the usual choice.
template <typename Mu>
  requires std::is_invocable_r_v<double, const Mu&, double>
inline HalfplaneConstraint zcbf_row(const Barrier& barrier, const ControlAffineSystem& system,
                                    const Eigen::VectorXd& state, const Mu& mu,
                                    std::string label = "zcbf") {
  const LieDerivatives d = lie_derivatives(barrier, system, state);
  return {d.lg, -d.lf - mu(d.value), std::move(label)};
}

/// Soft minimum of alpha_i h_i over the context's index set.
inline double composite_softmin(const CompositeContext& ctx, std::span<const double> h_values) {
  std::vector<double> weighted;
  weighted.reserve(h_values.size());
  for (std::size_t i = 0; i < h_values.size(); ++i) {
    const double a = ctx.alpha[static_cast<Eigen::Index>(i)];
    if (ctx.index_set == SoftminIndexSet::kActiveOnly && !(a > 0.0)) continue;
    weighted.push_back(a * h_values[i]);
  }
  // With no active index the restricted sum is empty; fall back to all indices.
  if (weighted.empty()) {
    for (std::size_t i = 0; i < h_values.size(); ++i) {
      weighted.push_back(ctx.alpha[static_cast<Eigen::Index>(i)] * h_values[i]);
    }
  }
  return softmin(weighted);
}

/// Time-varying composite reachability row:
///   sum_i alpha_i (L_f h_i + L_g h_i u) + sum_i h_i alpha_dot_i
///       >= -gamma tanh(softmin_i(alpha_i h_i)).
inline HalfplaneConstraint composite_row(const CompositeContext& ctx,
                                         const ControlAffineSystem& system,
                                         const Eigen::VectorXd& state,
                                         std::string label = "composite") {
  ctx.validate();
  Eigen::VectorXd a = Eigen::VectorXd::Zero(system.input_dim());
  double drift_term = 0.0;
  double exchange_term = 0.0;
  std::vector<double> h_values(ctx.barriers.size());
  for (std::size_t i = 0; i < ctx.barriers.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    const LieDerivatives d = lie_derivatives(ctx.barriers[i], system, state);
    h_values[i] = d.value;
    a += ctx.alpha[idx] * d.lg;
    drift_term += ctx.alpha[idx] * d.lf;
    exchange_term += d.value * ctx.alpha_dot[idx];
  }
  const double forcing = -ctx.gamma * std::tanh(composite_softmin(ctx, h_values));
  return {a, -drift_term - exchange_term + forcing, std::move(label)};
}

}  // namespace smooth_cbf
