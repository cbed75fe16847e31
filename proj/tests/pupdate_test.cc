#include <gtest/gtest.h>

#include "drf/problems.h"
#include "drf/pupdate.h"
#include "oracles.h"
#include "test_util.h"

namespace drf {
namespace {

using testing::TableProblem;

oracle::FlooredBall Ref(const Chi2Set& set) {
  return oracle::FlooredBall::Chi2(set.n(), set.rho(), set.delta());
}

DrfProblem Table(const Eigen::MatrixXd& values) {
  return TableProblem(values, {}, std::make_shared<EuclideanBall>(1, 1.0));
}

TEST(BmdStep, ZeroValuesLeaveStateUnchanged) {
  const Chi2Set set(6, 1.0, 0.5);
  Vector p(6);
  p << 0.2, 0.15, 0.15, 0.2, 0.15, 0.15;
  DistState state(set, p);
  Rng rng(1);
  for (int k = 0; k < 20; ++k) BmdStep(Table(Eigen::MatrixXd::Zero(1, 6)), 0, Vector::Zero(1), state, 0.5, rng);
  EXPECT_LE((state.Materialize() - p).lpNorm<Eigen::Infinity>(), 1e-15);
}

TEST(BmdStep, VanishingStepLeavesStateUnchanged) {
  const Chi2Set set(6, 1.0, 0.5);
  DistState state(set);
  Rng rng(2);
  BmdStep(Table(Eigen::MatrixXd::Constant(1, 6, 0.8)), 0, Vector::Zero(1), state, 1e-300, rng);
  EXPECT_LE((state.Materialize() - set.Uniform()).lpNorm<Eigen::Infinity>(), 1e-9);
  EXPECT_THROW(
      BmdStep(Table(Eigen::MatrixXd::Zero(1, 6)), 0, Vector::Zero(1), state, 0.0, rng),
      std::invalid_argument);
}

TEST(BmdStep, ForcedIndexMatchesDenseOracle) {
  const Chi2Set set(3, 0.6, 0.3);
  Vector p(3), f(3);
  p << 0.5, 0.25, 0.3;
  f << 0.4, -0.9, 0.2;
  ASSERT_TRUE(Contains(set, p, 0));
  Eigen::MatrixXd values(1, 3);
  values.row(0) = f.transpose();
  for (int forced = 0; forced < 3; ++forced) {
    for (double step : {0.05, 0.3, 2.0}) {
      DistState state(set, p);
      const auto record = BmdStepAt(Table(values), 0, Vector::Zero(1), state, step, forced);
      Vector w = p;
      w[forced] += step * p.sum() * f[forced] / p[forced];
      EXPECT_NEAR(record.estimator_value, p.sum() * f[forced] / p[forced], 1e-15);
      EXPECT_LE((state.Materialize() - oracle::DykstraProject(Ref(set), w)).lpNorm<Eigen::Infinity>(),
                1e-6);
    }
  }
}

TEST(BmdStep, EstimatorIsUnbiased) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + int(rng() % 9);
    const Chi2Set set(n, 0.5, 0.5);
    const Vector p =
        Project(set, set.Uniform() + 0.5 / n * Vector::NullaryExpr(n, [&] { return rng.Uniform() - 0.5; }));
    const Vector f = Vector::NullaryExpr(n, [&] { return 2 * rng.Uniform() - 1; });
    Vector expectation = Vector::Zero(n);
    for (int r = 0; r < n; ++r) {
      // g is one-sparse at r with value sum(p) f_r / p_r, drawn with prob p_r / sum(p).
      expectation[r] += p[r] / p.sum() * (p.sum() * f[r] / p[r]);
    }
    EXPECT_LE((expectation - f).lpNorm<Eigen::Infinity>(), 1e-12);
  }
}

TEST(BmdStep, IteratesStayMembersAndAscend) {
  const int n = 20;
  const Chi2Set set(n, 2.0, 0.5);
  Eigen::MatrixXd values(1, n);
  for (int r = 0; r < n; ++r) values(0, r) = std::sin(0.7 * r);
  const DrfProblem problem = Table(values);
  DistState state(set);
  Rng rng(4);
  const double initial = state.Materialize().dot(values.row(0).transpose());
  for (int t = 1; t <= 1000; ++t) {
    BmdStep(problem, 0, Vector::Zero(1), state, 0.02 / std::sqrt(double(t)), rng);
    ASSERT_TRUE(Contains(set, state.Materialize(), 1e-8));
  }
  EXPECT_GE(state.Materialize().dot(values.row(0).transpose()), initial - 1e-3);
}

TEST(OfoPStep, ZeroValuesAndExplicitStep) {
  const Chi2Set set(4, 1.0, 0.4);
  Vector p(4);
  p << 0.4, 0.2, 0.2, 0.2;
  ASSERT_TRUE(Contains(set, p, 0));
  EXPECT_LE((OfoPStep(Table(Eigen::MatrixXd::Zero(1, 4)), set, 0, Vector::Zero(1), p, 1.0) - p).norm(),
            1e-15);
  Eigen::MatrixXd values(1, 4);
  values << 0.5, -0.25, 0.1, 0.3;
  const Vector got = OfoPStep(Table(values), set, 0, Vector::Zero(1), p, 0.4);
  const Vector w = p + 0.4 * values.row(0).transpose();
  EXPECT_LE((got - oracle::DykstraProject(Ref(set), w)).lpNorm<Eigen::Infinity>(), 1e-4);
}

}  // namespace
}  // namespace drf
