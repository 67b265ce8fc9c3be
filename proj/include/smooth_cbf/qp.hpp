#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "smooth_cbf/errors.hpp"

namespace smooth_cbf {

/// a^T u >= b.
struct HalfplaneConstraint {
  Eigen::VectorXd a;
  double b = 0.0;
  std::string label;

  [[nodiscard]] double residual(const Eigen::VectorXd& u) const { return a.dot(u) - b; }
};

/// minimize ||u||^2  s.t.  every constraint,  ||u||_inf <= box.
struct QpProblem {
  std::vector<HalfplaneConstraint> constraints;
  double box = 10.0;
  int dim = 2;

  void validate() const {
    if (dim < 1 || dim > 3) throw ConfigError("QP dimension must be 1, 2 or 3");
    if (!(box > 0.0)) throw ConfigError("QP box bound must be positive");
    if (!std::isfinite(box)) throw NumericalError("QP box bound is not finite");
    for (const auto& c : constraints) {
      if (c.a.size() != dim) {
        throw ConfigError("constraint '" + c.label + "' has normal of length " +
                          std::to_string(c.a.size()) + ", expected " + std::to_string(dim));
      }
      if (!c.a.allFinite() || !std::isfinite(c.b)) {
        throw NumericalError("constraint '" + c.label + "' is not finite");
      }
    }
  }
};

struct QpSolution {
  Eigen::VectorXd u;
  std::vector<std::string> active_set;
  double objective = 0.0;
};

/// Tolerances shared by the solver, its callers and the tests.
struct QpTolerances {
  static constexpr double kFeasibility = 1e-9;
  static constexpr double kTie = 1e-12;
  /// Minimum normalized Gram determinant for a set of hyperplanes to count as
  /// linearly independent.
  static constexpr double kIndependence = 1e-12;
};

namespace detail {

inline bool lexicographically_less(const Eigen::VectorXd& lhs, const Eigen::VectorXd& rhs) {
  for (Eigen::Index i = 0; i < lhs.size(); ++i) {
    if (lhs[i] < rhs[i]) return true;
    if (lhs[i] > rhs[i]) return false;
  }
  return false;
}

struct Row {
  Eigen::VectorXd a;
  double b;
};

// Minimum-norm point of {u : a_s^T u = b_s for s in subset}, or nothing if the
// rows are (numerically) dependent.
inline std::optional<Eigen::VectorXd> min_norm_on_intersection(const std::vector<Row>& rows,
                                                               const std::vector<int>& subset,
                                                               int dim) {
  const auto k = static_cast<Eigen::Index>(subset.size());
  Eigen::MatrixXd a(k, dim);
  Eigen::VectorXd b(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    a.row(i) = rows[subset[i]].a.transpose();
    b[i] = rows[subset[i]].b;
  }
  const Eigen::MatrixXd gram = a * a.transpose();
  const double diag_product = gram.diagonal().prod();
  if (!(diag_product > 0.0)) return std::nullopt;
  if (gram.determinant() / diag_product <= QpTolerances::kIndependence) return std::nullopt;
  const Eigen::VectorXd multipliers = gram.partialPivLu().solve(b);
  return Eigen::VectorXd(a.transpose() * multipliers);
}

}  // namespace detail

/// Exact global minimizer by enumerating KKT candidates.
///
/// Candidates are u = 0 and the minimum-norm points of every intersection of up
/// to `dim` constraint hyperplanes, box faces included as +-e_j^T u >= -M. The
/// optimum of a strictly convex QP is one of these, so the feasible candidate of
/// least norm is optimal. Returns nullopt when no candidate is feasible.
inline std::optional<QpSolution> solve_min_norm(const QpProblem& problem) {
  problem.validate();
  const int dim = problem.dim;
  const double box = problem.box;

  std::vector<detail::Row> rows;
  rows.reserve(problem.constraints.size() + 2 * dim);
  for (const auto& c : problem.constraints) rows.push_back({c.a, c.b});
  for (int j = 0; j < dim; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    e[j] = -1.0;
    rows.push_back({e, -box});  // u_j <= M
    e[j] = 1.0;
    rows.push_back({e, -box});  // u_j >= -M
  }
  const int row_count = static_cast<int>(rows.size());

  const auto feasible = [&](const Eigen::VectorXd& u) {
    for (const auto& c : problem.constraints) {
      if (c.residual(u) < -QpTolerances::kFeasibility) return false;
    }
    return (u.cwiseAbs().array() <= box + QpTolerances::kFeasibility).all();
  };

  std::optional<Eigen::VectorXd> best;
  double best_norm = std::numeric_limits<double>::infinity();
  const auto consider = [&](const Eigen::VectorXd& u) {
    if (!u.allFinite() || !feasible(u)) return;
    const double norm = u.squaredNorm();
    if (!best || norm < best_norm - QpTolerances::kTie ||
        (norm <= best_norm + QpTolerances::kTie && detail::lexicographically_less(u, *best))) {
      best = u;
      best_norm = norm;
    }
  };

  consider(Eigen::VectorXd::Zero(dim));

  // Subsets of size 1..dim in lexicographic index order.
  std::vector<int> subset;
  for (int size = 1; size <= dim; ++size) {
    subset.assign(size, 0);
    for (int i = 0; i < size; ++i) subset[i] = i;
    while (true) {
      if (subset.back() < row_count) {
        if (auto u = detail::min_norm_on_intersection(rows, subset, dim)) consider(*u);
      }
      int pos = size - 1;
      while (pos >= 0 && subset[pos] == row_count - size + pos) --pos;
      if (pos < 0) break;
      ++subset[pos];
      for (int i = pos + 1; i < size; ++i) subset[i] = subset[i - 1] + 1;
    }
  }

  if (!best) return std::nullopt;

  QpSolution solution;
  solution.u = best->cwiseMax(-box).cwiseMin(box);
  solution.objective = solution.u.squaredNorm();
  for (const auto& c : problem.constraints) {
    if (std::abs(c.residual(solution.u)) <= QpTolerances::kFeasibility) {
      solution.active_set.push_back(c.label);
    }
  }
  for (int j = 0; j < dim; ++j) {
    if (solution.u[j] >= box - QpTolerances::kFeasibility) {
      solution.active_set.push_back("u" + std::to_string(j + 1) + "<=M");
    } else if (solution.u[j] <= -box + QpTolerances::kFeasibility) {
      solution.active_set.push_back("u" + std::to_string(j + 1) + ">=-M");
    }
  }
  return solution;
}

}  // namespace smooth_cbf
