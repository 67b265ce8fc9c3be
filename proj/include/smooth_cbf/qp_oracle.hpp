#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "smooth_cbf/errors.hpp"
#include "smooth_cbf/qp.hpp"

namespace smooth_cbf {

/// Brute-force reference for solve_min_norm: the least-norm point of the box
/// lattice {k * resolution} that satisfies every constraint relaxed by
/// resolution * max ||a||.
///
/// Every lattice point is classified. The last coordinate of each lattice line
/// is handled in closed form (its feasible set is an interval), which is
/// equivalent to testing the points one by one but fast enough for 2-D sweeps.
inline std::optional<Eigen::VectorXd> oracle_grid(const QpProblem& problem, double resolution) {
  problem.validate();
  if (!(resolution > 0.0) || resolution > problem.box / 10.0) {
    throw ConfigError("oracle resolution must be in (0, box / 10]");
  }
  const int dim = problem.dim;
  const auto half = static_cast<long long>(std::floor(problem.box / resolution + 1e-9));

  double max_norm = 0.0;
  for (const auto& c : problem.constraints) max_norm = std::max(max_norm, c.a.norm());
  const double slack = resolution * max_norm;

  std::optional<Eigen::VectorXd> best;
  double best_norm = std::numeric_limits<double>::infinity();
  Eigen::VectorXd point = Eigen::VectorXd::Zero(dim);
  const int last = dim - 1;

  const auto clamp_index = [&](double k) {
    return static_cast<long long>(std::clamp(k, -static_cast<double>(half) - 1.0,
                                             static_cast<double>(half) + 1.0));
  };

  const auto scan_line = [&]() {
    long long lo = -half;
    long long hi = half;
    for (const auto& c : problem.constraints) {
      double partial = 0.0;
      for (int j = 0; j < last; ++j) partial += c.a[j] * point[j];
      const double need = c.b - slack - partial;  // a_last * u_last >= need
      const double coef = c.a[last];
      if (coef > 0.0) {
        lo = std::max(lo, clamp_index(std::ceil(need / coef / resolution)));
      } else if (coef < 0.0) {
        hi = std::min(hi, clamp_index(std::floor(need / coef / resolution)));
      } else if (need > 0.0) {
        return;
      }
      if (lo > hi) return;
    }
    const long long k = lo > 0 ? lo : (hi < 0 ? hi : 0);
    point[last] = static_cast<double>(k) * resolution;
    const double norm = point.squaredNorm();
    if (norm < best_norm) {
      best_norm = norm;
      best = point;
    }
  };

  // Odometer over the leading coordinates.
  std::vector<long long> index(static_cast<std::size_t>(last), -half);
  while (true) {
    for (int j = 0; j < last; ++j) point[j] = static_cast<double>(index[j]) * resolution;
    scan_line();
    int pos = last - 1;
    while (pos >= 0 && index[pos] == half) {
      index[pos] = -half;
      --pos;
    }
    if (pos < 0) break;
    ++index[pos];
  }
  return best;
}

}  // namespace smooth_cbf
