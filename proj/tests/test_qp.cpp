#include <cmath>
#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "smooth_cbf/qp_oracle.hpp"
#include "test_support.hpp"

namespace smooth_cbf {
namespace {

QpProblem problem_of(std::vector<HalfplaneConstraint> rows, double box = 10.0, int dim = 2) {
  QpProblem p;
  p.constraints = std::move(rows);
  p.box = box;
  p.dim = dim;
  return p;
}

QpProblem random_feasible(std::mt19937_64& rng, int dim = 2) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> mag(0.2, 3.0);
  std::uniform_real_distribution<double> pt(-8.0, 8.0);
  std::uniform_real_distribution<double> margin(0.0, 2.0);
  std::uniform_int_distribution<int> count(0, 6);
  QpProblem p;
  p.dim = dim;
  Eigen::VectorXd x(dim);
  for (int j = 0; j < dim; ++j) x[j] = pt(rng);
  const int m = count(rng);
  for (int i = 0; i < m; ++i) {
    Eigen::VectorXd a(dim);
    for (int j = 0; j < dim; ++j) a[j] = normal(rng);
    a *= mag(rng) / a.norm();
    p.constraints.push_back({a, a.dot(x) - margin(rng) * a.norm(), "c" + std::to_string(i)});
  }
  return p;
}

// KKT certificate: u feasible and u = sum lambda_i a_i over the tight rows
// (box faces included) with lambda >= 0, solved by nonnegative least squares
// over all subsets of tight rows.
bool satisfies_kkt(const QpProblem& p, const Eigen::VectorXd& u, double tol) {
  std::vector<Eigen::VectorXd> tight;
  for (const auto& c : p.constraints) {
    if (c.residual(u) < -tol) return false;
    if (std::abs(c.residual(u)) <= tol) tight.push_back(c.a);
  }
  for (int j = 0; j < p.dim; ++j) {
    if (std::abs(u[j]) > p.box + tol) return false;
    if (std::abs(std::abs(u[j]) - p.box) <= tol) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(p.dim);
      e[j] = u[j] > 0 ? -1.0 : 1.0;
      tight.push_back(e);
    }
  }
  if (u.norm() <= tol) return true;
  const auto n = tight.size();
  // Gradient of 0.5||u||^2 is u; need u in the cone of tight normals.
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<Eigen::VectorXd> cols;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) cols.push_back(tight[i]);
    }
    if (static_cast<int>(cols.size()) > p.dim) continue;
    Eigen::MatrixXd a(p.dim, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) a.col(static_cast<Eigen::Index>(i)) = cols[i];
    const Eigen::VectorXd lambda = a.colPivHouseholderQr().solve(u);
    if ((lambda.array() >= -tol).all() && (a * lambda - u).norm() <= tol * std::max(1.0, u.norm())) {
      return true;
    }
  }
  return false;
}

TEST(SolveMinNorm, SingleConstraintProjection) {
  const auto s = solve_min_norm(problem_of({{Eigen::Vector2d(1, 0), 1.0, "c"}}));
  ASSERT_TRUE(s);
  EXPECT_TRUE(s->u.isApprox(Eigen::Vector2d(1, 0), 1e-15));
  EXPECT_EQ(s->active_set, std::vector<std::string>{"c"});
  EXPECT_DOUBLE_EQ(s->objective, 1.0);
}

TEST(SolveMinNorm, ObliqueProjection) {
  const auto s = solve_min_norm(problem_of({{Eigen::Vector2d(3, 4), 10.0, "c"}}));
  ASSERT_TRUE(s);
  EXPECT_TRUE(s->u.isApprox(Eigen::Vector2d(1.2, 1.6), 1e-14));
}

TEST(SolveMinNorm, ZeroNormalInfeasible) {
  EXPECT_FALSE(solve_min_norm(problem_of({{Eigen::Vector2d(0, 0), 1.0, "c"}})));
}

TEST(SolveMinNorm, ZeroNormalSatisfiedRowIsHarmless) {
  const auto s = solve_min_norm(problem_of({{Eigen::Vector2d(0, 0), -1.0, "c"}}));
  ASSERT_TRUE(s);
  EXPECT_EQ(s->u, Eigen::Vector2d::Zero());
}

TEST(SolveMinNorm, TwoActiveConstraints) {
  const auto s = solve_min_norm(
      problem_of({{Eigen::Vector2d(1, 0), 1.0, "x"}, {Eigen::Vector2d(0, 1), 1.0, "y"}}));
  ASSERT_TRUE(s);
  EXPECT_TRUE(s->u.isApprox(Eigen::Vector2d(1, 1), 1e-15));
  EXPECT_EQ(s->active_set, (std::vector<std::string>{"x", "y"}));
}

TEST(SolveMinNorm, InactiveConstraintGivesZero) {
  const auto s = solve_min_norm(problem_of({{Eigen::Vector2d(1, 1), -3.0, "c"}}));
  ASSERT_TRUE(s);
  EXPECT_EQ(s->u, Eigen::Vector2d::Zero());
  EXPECT_TRUE(s->active_set.empty());
}

TEST(SolveMinNorm, BoxBindsAndIsReported) {
  // u1 + 0.1 u2 >= 10.5 forces u1 to the box face.
  const auto s = solve_min_norm(problem_of({{Eigen::Vector2d(1, 0.1), 10.5, "c"}}));
  ASSERT_TRUE(s);
  EXPECT_NEAR(s->u[0], 10.0, 1e-12);
  EXPECT_NEAR(s->u[1], 5.0, 1e-9);
  EXPECT_LE(s->u.lpNorm<Eigen::Infinity>(), 10.0);
  EXPECT_EQ(s->active_set, (std::vector<std::string>{"c", "u1<=M"}));
}

TEST(SolveMinNorm, BoxMakesInfeasible) {
  EXPECT_FALSE(solve_min_norm(problem_of({{Eigen::Vector2d(1, 1), 20.5, "c"}})));
}

TEST(SolveMinNorm, AntiparallelInfeasible) {
  const Eigen::Vector2d a(0.6, -0.8);
  const auto p = problem_of({{a, 1.0, "p"}, {-a, 1.0, "n"}});
  EXPECT_FALSE(solve_min_norm(p));
  EXPECT_FALSE(oracle_grid(p, 1e-2));
}

TEST(SolveMinNorm, DuplicateRowsAreHandled) {
  const Eigen::Vector2d a(1, 2);
  const auto s = solve_min_norm(problem_of({{a, 5.0, "a"}, {a, 5.0, "b"}, {2 * a, 10.0, "c"}}));
  ASSERT_TRUE(s);
  EXPECT_TRUE(s->u.isApprox(Eigen::Vector2d(1, 2), 1e-14));
}

TEST(SolveMinNorm, OneAndThreeDimensions) {
  const auto s1 = solve_min_norm(problem_of({{Eigen::VectorXd::Constant(1, -2.0), 1.0, "c"}}, 10.0, 1));
  ASSERT_TRUE(s1);
  EXPECT_DOUBLE_EQ(s1->u[0], -0.5);
  const auto s3 = solve_min_norm(problem_of({{Eigen::Vector3d(1, 0, 0), 1.0, "x"},
                                             {Eigen::Vector3d(0, 1, 0), 2.0, "y"},
                                             {Eigen::Vector3d(0, 0, -1), 3.0, "z"}},
                                            10.0, 3));
  ASSERT_TRUE(s3);
  EXPECT_TRUE(s3->u.isApprox(Eigen::Vector3d(1, 2, -3), 1e-14));
}

TEST(SolveMinNorm, ValidatesInput) {
  EXPECT_THROW(solve_min_norm(problem_of({{Eigen::Vector3d(1, 0, 0), 1.0, "c"}})), ConfigError);
  EXPECT_THROW(solve_min_norm(problem_of({{Eigen::Vector2d(NAN, 0), 1.0, "c"}})), NumericalError);
  EXPECT_THROW(solve_min_norm(problem_of({}, 0.0)), ConfigError);
  EXPECT_THROW(solve_min_norm(problem_of({}, 10.0, 4)), ConfigError);
}

TEST(SolveMinNorm, RandomInstancesSatisfyKkt) {
  std::mt19937_64 rng(17);
  for (int dim = 1; dim <= 3; ++dim) {
    for (int k = 0; k < 2000; ++k) {
      const QpProblem p = random_feasible(rng, dim);
      const auto s = solve_min_norm(p);
      ASSERT_TRUE(s);
      for (const auto& c : p.constraints) EXPECT_GE(c.residual(s->u), -1e-9);
      EXPECT_LE(s->u.lpNorm<Eigen::Infinity>(), p.box + 1e-12);
      EXPECT_TRUE(satisfies_kkt(p, s->u, 1e-7)) << "dim " << dim << " instance " << k;
    }
  }
}

TEST(SolveMinNorm, NoExactlyFeasibleLatticePointIsShorter) {
  std::mt19937_64 rng(23);
  for (int k = 0; k < 100; ++k) {
    const QpProblem p = random_feasible(rng);
    const auto s = solve_min_norm(p);
    ASSERT_TRUE(s);
    const double res = 0.05;
    for (int i = -200; i <= 200; ++i) {
      for (int j = -200; j <= 200; ++j) {
        const Eigen::Vector2d g(i * res, j * res);
        if (g.norm() >= s->u.norm() - 2 * res) continue;
        bool ok = true;
        for (const auto& c : p.constraints) ok = ok && c.residual(g) >= 0.0;
        EXPECT_FALSE(ok) << "lattice point " << g.transpose() << " beats " << s->u.transpose();
      }
    }
  }
}

TEST(SolveMinNorm, ScalingEquivariance) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> lambda(0.01, 100.0);
  for (int k = 0; k < 1000; ++k) {
    QpProblem p = random_feasible(rng);
    if (p.constraints.empty()) continue;
    const auto s = solve_min_norm(p);
    const double l = lambda(rng);
    p.constraints[0].a *= l;
    p.constraints[0].b *= l;
    const auto t = solve_min_norm(p);
    ASSERT_TRUE(s && t);
    EXPECT_LT((s->u - t->u).norm(), 1e-9);
  }
}

TEST(SolveMinNorm, Deterministic) {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 200; ++k) {
    const QpProblem p = random_feasible(rng);
    const auto s = solve_min_norm(p);
    const auto t = solve_min_norm(p);
    ASSERT_TRUE(s && t);
    EXPECT_EQ(0, std::memcmp(s->u.data(), t->u.data(), sizeof(double) * 2));
    EXPECT_EQ(s->active_set, t->active_set);
  }
}

TEST(OracleGrid, EmptyProblemIsOrigin) {
  const auto o = oracle_grid(problem_of({}), 1e-2);
  ASSERT_TRUE(o);
  EXPECT_EQ(*o, Eigen::Vector2d::Zero());
}

TEST(OracleGrid, TwoActiveExample) {
  const auto p = problem_of({{Eigen::Vector2d(1, 0), 1.0, "x"}, {Eigen::Vector2d(0, 1), 1.0, "y"}});
  const auto o = oracle_grid(p, 1e-3);
  ASSERT_TRUE(o);
  EXPECT_LE((*o - Eigen::Vector2d(1, 1)).norm(), 2e-3);
}

TEST(OracleGrid, NormAgreesOnUnitNormalSingleRow) {
  // The objective is flat along the constraint, so the lattice minimizer may
  // sit off the projection point; its norm is within a lattice step.
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> b(-2.0, 8.0);
  for (int k = 0; k < 200; ++k) {
    const double th = ang(rng);
    const auto p = problem_of({{Eigen::Vector2d(std::cos(th), std::sin(th)), b(rng), "c"}});
    const auto s = solve_min_norm(p);
    const auto o = oracle_grid(p, 1e-3);
    ASSERT_TRUE(s && o);
    EXPECT_LE(std::abs(s->u.norm() - o->norm()), 2e-3);
  }
}

TEST(OracleGrid, RejectsCoarseResolution) {
  EXPECT_THROW(oracle_grid(problem_of({}), 2.0), ConfigError);
  EXPECT_THROW(oracle_grid(problem_of({}), 0.0), ConfigError);
}

}  // namespace
}  // namespace smooth_cbf
