#include <gtest/gtest.h>

#include <cmath>

#include "drf/mirror.h"
#include "oracles.h"

namespace drf {
namespace {

TEST(EuclideanBall, ZeroGradientKeepsPoint) {
  EuclideanBall ball(3, 1.0);
  Vector x(3);
  x << 0.2, -0.1, 0.4;
  EXPECT_EQ(ball.ProxStep(x, Vector::Zero(3), 0.7), x);
}

TEST(EuclideanBall, InteriorStepExample) {
  EuclideanBall ball(2, 1.0);
  Vector g(2);
  g << 0.3, 0.0;
  const Vector y = ball.ProxStep(Vector::Zero(2), g, 1.0);
  EXPECT_NEAR(y[0], -0.3, 1e-15);
  EXPECT_NEAR(y[1], 0.0, 1e-15);
}

TEST(EuclideanBall, ProjectionScalesRadially) {
  EuclideanBall ball(2, 1.0);
  Vector x(2);
  x << 2.0, 0.0;
  const Vector y = ball.Project(x);
  EXPECT_NEAR(y[0], 1.0, 1e-15);
  EXPECT_NEAR(y[1], 0.0, 1e-15);
  Vector member(2);
  member << 0.3, 0.4;
  EXPECT_EQ(ball.Project(member), member);
}

TEST(EuclideanBall, HugeRadiusIsPlainGradientStep) {
  EuclideanBall ball(4, 1e6);
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector x = Vector::NullaryExpr(4, [&] { return rng.Uniform() - 0.5; });
    const Vector g = Vector::NullaryExpr(4, [&] { return rng.Uniform() - 0.5; });
    EXPECT_LE((ball.ProxStep(x, g, 0.3) - (x - 0.3 * g)).norm(), 1e-12);
  }
}

TEST(EuclideanBall, DiameterAndRejectsOutsidePoint) {
  EuclideanBall ball(3, 2.0);
  EXPECT_EQ(ball.diameter(), 8.0);
  Rng rng(2);
  for (int k = 0; k < 1000; ++k) {
    EXPECT_LE(ball.Bregman(ball.SamplePoint(rng), ball.SamplePoint(rng)), ball.diameter());
  }
  EXPECT_THROW(ball.ProxStep(Vector::Constant(3, 5.0), Vector::Zero(3), 1.0),
               std::invalid_argument);
  EXPECT_THROW(ball.ProxStep(Vector::Zero(3), Vector::Zero(3), 0.0), std::invalid_argument);
}

TEST(EntropySimplex, ProxExample) {
  const auto simplex = MakeEntropySimplex(2);
  Vector x(2), g(2);
  x << 0.5, 0.5;
  g << 1.0, 0.0;
  const Vector y = simplex->ProxStep(x, g, std::log(2.0));
  const Vector ref = oracle::GoldenEntropyProx2(x, g, std::log(2.0));
  EXPECT_NEAR(ref[0], 1.0 / 3, 1e-6);
  EXPECT_NEAR(y[0], 1.0 / 3, 1e-15);
  EXPECT_NEAR(y[1], 2.0 / 3, 1e-15);
}

TEST(EntropySimplex, ProxMatchesNumericalMinimizer) {
  const auto simplex = MakeEntropySimplex(2);
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector x = simplex->SamplePoint(rng);
    Vector g(2);
    g << 4 * rng.Uniform() - 2, 4 * rng.Uniform() - 2;
    const double step = 0.1 + rng.Uniform();
    EXPECT_NEAR(simplex->ProxStep(x, g, step)[0], oracle::GoldenEntropyProx2(x, g, step)[0],
                1e-6);
  }
}

TEST(EntropySimplex, DiameterIsLogDimFromCenter) {
  const auto simplex = MakeEntropySimplex(7);
  EXPECT_NEAR(simplex->diameter(), std::log(7.0), 1e-15);
  Rng rng(4);
  for (int k = 0; k < 1000; ++k) {
    EXPECT_LE(simplex->Bregman(simplex->SamplePoint(rng), simplex->Center()),
              simplex->diameter() + 1e-12);
  }
  // Every vertex attains it.
  Vector vertex = Vector::Zero(7);
  vertex[3] = 1.0;
  EXPECT_NEAR(simplex->Bregman(vertex, simplex->Center()), std::log(7.0), 1e-12);
}

TEST(ProductOfSimplices, OutputsArePositiveBlocksSummingToOne) {
  ProductOfSimplices domain(3, 5);
  EXPECT_NEAR(domain.diameter(), 3 * std::log(5.0), 1e-15);
  Rng rng(5);
  Vector x = domain.Center();
  for (int step = 0; step < 200; ++step) {
    const Vector g = Vector::NullaryExpr(15, [&] { return 50 * (rng.Uniform() - 0.5); });
    x = domain.ProxStep(x, g, 1.0);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(x.segment(j * 5, 5).sum(), 1.0, 1e-12);
    EXPECT_GT(x.minCoeff(), 0.0);
  }
}

TEST(ProductOfSimplices, ThreePointProperty) {
  ProductOfSimplices domain(2, 4);
  Rng rng(6);
  for (int trial = 0; trial < 300; ++trial) {
    const Vector x = domain.SamplePoint(rng);
    const Vector y = domain.SamplePoint(rng);
    const Vector g = Vector::NullaryExpr(8, [&] { return 2 * rng.Uniform() - 1; });
    const double step = 0.05 + rng.Uniform();
    const Vector xp = domain.ProxStep(x, g, step);
    const double lhs = g.dot(xp - y);
    const double rhs =
        (domain.Bregman(y, x) - domain.Bregman(y, xp) - domain.Bregman(xp, x)) / step;
    EXPECT_LE(lhs, rhs + 1e-9);
  }
}

TEST(BudgetBox, ProjectionMatchesGrid) {
  BudgetBox box(2, 1.0);
  Vector x(2);
  x << 0.9, 0.9;
  const Vector y = box.Project(x);
  const Vector ref = oracle::GridBudgetProjection2(x, 1.0, 0.01);
  EXPECT_NEAR(y[0], ref[0], 1e-4);
  EXPECT_NEAR(y[1], ref[1], 1e-4);
  EXPECT_NEAR(y[0], 0.5, 1e-12);
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    Vector z(2);
    z << 3 * rng.Uniform() - 1, 3 * rng.Uniform() - 1;
    const Vector a = box.Project(z);
    const Vector b = oracle::GridBudgetProjection2(z, 1.0, 0.01);
    EXPECT_LE((a - b).lpNorm<Eigen::Infinity>(), 1e-4);
  }
}

TEST(BudgetBox, ExtraCoordinateIsClipped) {
  BudgetBox box(2, 1.0, Interval{-1.0, 2.0});
  Vector x(3);
  x << 0.2, 0.3, 5.0;
  const Vector y = box.Project(x);
  EXPECT_EQ(y[2], 2.0);
  EXPECT_EQ(y.head(2), x.head(2));
  Rng rng(8);
  for (int k = 0; k < 1000; ++k) {
    EXPECT_LE(box.Bregman(box.SamplePoint(rng), box.SamplePoint(rng)), box.diameter() + 1e-12);
  }
}

TEST(BudgetBox, EuclideanThreePointProperty) {
  BudgetBox box(3, 1.0, Interval{0.0, 1.0});
  Rng rng(9);
  for (int trial = 0; trial < 300; ++trial) {
    const Vector x = box.SamplePoint(rng);
    const Vector y = box.SamplePoint(rng);
    const Vector g = Vector::NullaryExpr(4, [&] { return 4 * rng.Uniform() - 2; });
    const Vector xp = box.ProxStep(x, g, 0.7);
    EXPECT_LE(g.dot(xp - y),
              (box.Bregman(y, x) - box.Bregman(y, xp) - box.Bregman(xp, x)) / 0.7 + 1e-9);
  }
}

TEST(ProjectOntoSimplex, KnownCases) {
  Vector v(3);
  v << 0.2, 0.3, 0.5;
  EXPECT_LE((ProjectOntoSimplex(v, 1.0) - v).norm(), 1e-15);
  v << 2.0, 0.0, 0.0;
  const Vector p = ProjectOntoSimplex(v, 1.0);
  EXPECT_NEAR(p[0], 1.0, 1e-15);
  EXPECT_NEAR(p.sum(), 1.0, 1e-15);
}

}  // namespace
}  // namespace drf
