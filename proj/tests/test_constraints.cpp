#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace smooth_cbf {
namespace {

using testing::uniform_vector;

const EllipsoidBarrier kUnitDisc({0.0, 0.0}, {1.0, 1.0});

TEST(ClassKappa, Values) {
  EXPECT_DOUBLE_EQ(ClassKappa::linear(2.0)(0.75), 1.5);
  EXPECT_DOUBLE_EQ(ClassKappa::cubic(1.0)(-0.5), -0.125);
  EXPECT_DOUBLE_EQ(ClassKappa::odd_power(3.0, 5)(2.0), 96.0);
  EXPECT_THROW(ClassKappa::linear(0.0), ConfigError);
  EXPECT_THROW(ClassKappa::odd_power(1.0, 2), ConfigError);
}

TEST(Fcbf, ForcingHasSignZeroAtZero) {
  const FcbfParams p{2.0, 0.5};
  EXPECT_DOUBLE_EQ(p.forcing(0.0), 0.0);
  EXPECT_DOUBLE_EQ(p.forcing(4.0), 4.0);
  EXPECT_DOUBLE_EQ(p.forcing(-4.0), -4.0);
  EXPECT_THROW((FcbfParams{1.0, 1.0}.validate()), ConfigError);
  EXPECT_THROW((FcbfParams{-1.0, 0.5}.validate()), ConfigError);
}

TEST(Fcbf, RowOutsideUnitDisc) {
  const auto row = fcbf_row(kUnitDisc, single_integrator(), Eigen::Vector2d(2, 0), FcbfParams{1.0, 0.5});
  EXPECT_TRUE(row.a.isApprox(Eigen::Vector2d(-4, 0), 1e-15));
  EXPECT_NEAR(row.b, std::sqrt(3.0), 1e-15);
}

TEST(Zcbf, RowInsideUnitDisc) {
  const auto row = zcbf_row(kUnitDisc, single_integrator(), Eigen::Vector2d(0.5, 0), ClassKappa::linear(2.0));
  EXPECT_TRUE(row.a.isApprox(Eigen::Vector2d(-1, 0), 1e-15));
  EXPECT_DOUBLE_EQ(row.b, -1.5);
}

TEST(Zcbf, UnicycleHeadingEntersThroughControlMatrix) {
  // Facing away from the disc center: v > 0 increases distance, so a[0] < 0.
  const auto row = zcbf_row(kUnitDisc, unicycle(), Eigen::Vector3d(0.5, 0, 0), ClassKappa::linear(1.0));
  EXPECT_NEAR(row.a[0], -1.0, 1e-15);
  EXPECT_DOUBLE_EQ(row.a[1], 0.0);
}

TEST(Rows, FcbfEqualsZcbfWithSubstitutedForcing) {
  std::mt19937_64 rng(41);
  const FcbfParams params{1.7, 0.3};
  const std::vector<Barrier> barriers = {
      EllipsoidBarrier({0.2, -0.3}, {0.5, 0.8}),
      SuperellipseObstacleBarrier({0, 0}, {0.7, 0.2}, std::numbers::pi / 2, 6, 1.0)};
  const auto mu = [&](double h) { return params.forcing(h); };
  for (const auto& b : barriers) {
    for (int k = 0; k < 100; ++k) {
      const Eigen::VectorXd x = uniform_vector(rng, 3, -2.0, 2.0);
      const auto f = fcbf_row(b, unicycle(), x, params);
      const auto z = zcbf_row(b, unicycle(), x, mu);
      EXPECT_EQ(f.a, z.a);
      EXPECT_EQ(f.b, z.b);
    }
  }
}

TEST(Composite, SingleBarrierReducesToSoftminRow) {
  std::mt19937_64 rng(43);
  const std::vector<Barrier> barriers = {EllipsoidBarrier({0.4, 0.1}, {0.3, 0.6})};
  const CompositeContext ctx{barriers, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1), 2.0,
                             SoftminIndexSet::kAll};
  for (int k = 0; k < 1000; ++k) {
    const Eigen::VectorXd x = uniform_vector(rng, 2, -2.0, 2.0);
    const auto row = composite_row(ctx, single_integrator(), x);
    const BarrierValue h = eval(barriers[0], x);
    // -gamma tanh(-ln(exp(-h))) = -gamma tanh(h)
    EXPECT_LE((row.a - h.gradient).lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_NEAR(row.b, -2.0 * std::tanh(h.value), 1e-12);
  }
}

TEST(Composite, ZeroWeightsGiveConstantRow) {
  const std::vector<Barrier> barriers = {EllipsoidBarrier({0, 0}, {1, 1}),
                                         EllipsoidBarrier({3, 0}, {1, 1}),
                                         EllipsoidBarrier({0, 3}, {1, 1})};
  const CompositeContext ctx{barriers, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3), 1.0,
                             SoftminIndexSet::kAll};
  const auto row = composite_row(ctx, single_integrator(), Eigen::Vector2d(5, 5));
  EXPECT_EQ(row.a, Eigen::Vector2d::Zero());
  EXPECT_NEAR(row.b, -std::tanh(-std::log(3.0)), 1e-15);
  // -gamma tanh(-ln m) = gamma (m^2 - 1) / (m^2 + 1) > 0: no input satisfies it.
  EXPECT_NEAR(row.b, 0.8, 1e-15);
  EXPECT_FALSE(solve_min_norm({{row}, 10.0, 2}));
}

TEST(Composite, ExchangeTermMatchesNumericTimeDerivative) {
  const std::vector<Barrier> barriers = {EllipsoidBarrier({0, 0}, {0.5, 0.5}),
                                         EllipsoidBarrier({0.5, 0}, {0.5, 0.5})};
  const TransitionFunctions tf = TransitionFunctions::sine_squared();
  const double tau = std::numbers::pi / 4;
  const Eigen::Vector2d x(0.1, 0.2);
  const Eigen::Vector2d alpha(tf.down(tau), tf.up(tau));
  const Eigen::Vector2d alpha_dot(tf.down_dot(tau), tf.up_dot(tau));
  EXPECT_NEAR(alpha[0], 0.5, 1e-15);
  EXPECT_NEAR(alpha_dot[0], -1.0, 1e-15);
  EXPECT_NEAR(alpha_dot[1], 1.0, 1e-15);

  const CompositeContext moving{barriers, alpha, alpha_dot, 1.0, SoftminIndexSet::kAll};
  const CompositeContext frozen{barriers, alpha, Eigen::Vector2d::Zero(), 1.0, SoftminIndexSet::kAll};
  const double exchange = composite_row(frozen, single_integrator(), x).b -
                          composite_row(moving, single_integrator(), x).b;

  const double h1 = eval(barriers[0], x).value;
  const double h2 = eval(barriers[1], x).value;
  const auto weighted = [&](double s) { return tf.down(s) * h1 + tf.up(s) * h2; };
  const double step = 1e-5;
  const double numeric = (weighted(tau + step) - weighted(tau - step)) / (2 * step);
  EXPECT_NEAR(exchange, numeric, 1e-8);
  EXPECT_NEAR(exchange, h2 - h1, 1e-12);
}

TEST(Composite, ForcingMagnitudeBoundedByGamma) {
  std::mt19937_64 rng(47);
  const std::vector<Barrier> barriers = {EllipsoidBarrier({-1, 0}, {0.3, 0.3}),
                                         EllipsoidBarrier({1, 0}, {0.4, 0.2})};
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto sys = unicycle();
  for (int k = 0; k < 2000; ++k) {
    const Eigen::VectorXd x = uniform_vector(rng, 3, -3.0, 3.0);
    const double s = u01(rng);
    const Eigen::Vector2d alpha(1 - s, s);
    const Eigen::Vector2d alpha_dot = uniform_vector(rng, 2, -1.0, 1.0);
    const double gamma = 0.1 + 5 * u01(rng);
    const CompositeContext ctx{barriers, alpha, alpha_dot, gamma,
                               k % 2 ? SoftminIndexSet::kAll : SoftminIndexSet::kActiveOnly};
    const auto row = composite_row(ctx, sys, x);
    double known = 0.0;
    for (int i = 0; i < 2; ++i) {
      const auto d = lie_derivatives(barriers[static_cast<std::size_t>(i)], sys, x);
      known += alpha[i] * d.lf + d.value * alpha_dot[i];
    }
    EXPECT_LE(std::abs(row.b + known), gamma + 1e-12 * std::max(1.0, std::abs(known)));
  }
}

TEST(Composite, UnitWeightMatchesFcbfNormal) {
  const std::vector<Barrier> barriers = {EllipsoidBarrier({0, 0}, {0.5, 0.5}),
                                         EllipsoidBarrier({2, 0}, {0.5, 0.5}),
                                         EllipsoidBarrier({0, 2}, {0.5, 0.5})};
  const Eigen::Vector2d x(0.7, -0.4);
  for (std::size_t j = 0; j < 3; ++j) {
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(3);
    alpha[static_cast<Eigen::Index>(j)] = 1.0;
    const CompositeContext ctx{barriers, alpha, Eigen::VectorXd::Zero(3), 1.5, SoftminIndexSet::kAll};
    const auto row = composite_row(ctx, single_integrator(), x);
    const auto f = fcbf_row(barriers[j], single_integrator(), x, FcbfParams{});
    EXPECT_EQ(row.a, f.a);
    // Inactive indices each contribute exp(0) = 1 to the soft minimum.
    const double hj = eval(barriers[j], x).value;
    EXPECT_NEAR(row.b, -1.5 * std::tanh(-std::log(std::exp(-hj) + 2.0)), 1e-12);

    const CompositeContext active{barriers, alpha, Eigen::VectorXd::Zero(3), 1.5,
                                  SoftminIndexSet::kActiveOnly};
    EXPECT_NEAR(composite_row(active, single_integrator(), x).b, -1.5 * std::tanh(hj), 1e-12);
  }
}

TEST(Composite, ActiveOnlyWithNoActiveIndexFallsBackToAll) {
  const std::vector<Barrier> barriers = {EllipsoidBarrier({0, 0}, {1, 1}),
                                         EllipsoidBarrier({2, 0}, {1, 1})};
  const CompositeContext ctx{barriers, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2), 1.0,
                             SoftminIndexSet::kActiveOnly};
  const std::vector<double> h = {0.3, -4.0};
  EXPECT_NEAR(composite_softmin(ctx, h), -std::log(2.0), 1e-15);
}

TEST(Composite, ValidatesContext) {
  const std::vector<Barrier> barriers = {EllipsoidBarrier({0, 0}, {1, 1})};
  const auto sys = single_integrator();
  const Eigen::Vector2d x(0, 0);
  EXPECT_THROW(composite_row({barriers, Eigen::VectorXd::Ones(2), Eigen::VectorXd::Zero(2)}, sys, x),
               ConfigError);
  EXPECT_THROW(composite_row({barriers, Eigen::VectorXd::Constant(1, 1.5), Eigen::VectorXd::Zero(1)}, sys, x),
               ConfigError);
  EXPECT_THROW(composite_row({{}, Eigen::VectorXd(), Eigen::VectorXd()}, sys, x), ConfigError);
  EXPECT_THROW(
      composite_row({barriers, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1), 0.0}, sys, x),
      ConfigError);
}

TEST(LieDerivatives, DimensionMismatchIsConfigError) {
  const AffineBarrier line(Eigen::VectorXd::Constant(1, -1.0), 0.0);
  EXPECT_THROW(lie_derivatives(line, single_integrator(2), Eigen::Vector2d(1, 1)), ConfigError);
  const auto d = lie_derivatives(line, single_integrator(1), Eigen::VectorXd::Constant(1, 2.0));
  EXPECT_DOUBLE_EQ(d.value, -2.0);
  EXPECT_DOUBLE_EQ(d.lf, 0.0);
  EXPECT_DOUBLE_EQ(d.lg[0], -1.0);
}

}  // namespace
}  // namespace smooth_cbf
