#include <gtest/gtest.h>

#include <cmath>

#include "drf/meta.h"
#include "drf/problems.h"
#include "oracles.h"
#include "test_util.h"

namespace drf {
namespace {

using testing::TableProblem;

// Constants only matter to the planner; the oracle is never called.
DrfProblem PlanningProblem(int m, int n, int d, double radius, double G, double M) {
  DrfProblem problem =
      TableProblem(Eigen::MatrixXd::Zero(m, n), {}, std::make_shared<EuclideanBall>(d, radius));
  problem.lipschitz = G;
  problem.bounds.assign(m, M);
  return problem;
}

SolverConfig PlanningConfig() {
  SolverConfig cfg;
  cfg.epsilon = 0.02;
  cfg.c_k = 0.05;
  cfg.nu0 = 0.05;
  cfg.rho = 5.0;
  cfg.delta = 0.95;
  cfg.w_scale_override = 1.0;
  return cfg;
}

// The T inequality written out from scratch.
double PlanLhs(double T, int m, int n, double G, double M, double D, const SolverConfig& cfg,
               double w) {
  const double cg = 1.0 + std::sqrt(2.0 * cfg.rho / n);
  const double rx = cg * G * std::log(T) * std::sqrt(2.0 * D) / std::sqrt(T);
  const double rp = 2.0 * cg * M * std::log(T) * std::sqrt(2.0 * cfg.rho) / (cfg.delta * std::sqrt(T));
  (void)m;
  return w * (rx + rp) + cfg.c_k * cfg.epsilon;
}

TEST(Plan, ReferenceInstanceMatchesLinearScan) {
  const double R = 5.0 * std::log(300.0);
  const DrfProblem problem = PlanningProblem(3, 1000, 300, R, 0.25, 0.25);
  const SolverConfig cfg = PlanningConfig();
  const Schedule s = Plan(problem, cfg);
  EXPECT_DOUBLE_EQ(s.constants.diameter_x, 2.0 * R * R);
  EXPECT_EQ(s.constants.omega, std::max(1.0, std::log(4.0 * 3 / 0.05)));
  auto holds = [&](long T) { return PlanLhs(double(T), 3, 1000, 0.25, 0.25, 2 * R * R, cfg, 1.0) <= cfg.epsilon / 2; };
  ASSERT_TRUE(holds(s.T));
  EXPECT_FALSE(holds(s.T - 1));
  // The bound decreases past T = 8, so the first hit in a window below T is T itself.
  EXPECT_EQ(oracle::LinearScan(std::max(8L, s.T - 200000), s.T + 1, holds), s.T);
  auto holds_tilde = [&](long T) {
    return PlanLhs(double(T), 3, 1000, 0.25, 0.25, 2 * R * R, cfg, 1.0) <= (1 - 2 * cfg.c_k) * cfg.epsilon;
  };
  EXPECT_EQ(oracle::LinearScan(std::max(8L, s.T_tilde - 200000), s.T_tilde + 1, holds_tilde),
            s.T_tilde);
}

TEST(Plan, GrowsWithCkAndShrinksWithSmallerMultiplier) {
  const DrfProblem problem = PlanningProblem(3, 1000, 10, 2.0, 0.25, 0.25);
  SolverConfig cfg = PlanningConfig();
  cfg.epsilon = 0.1;
  cfg.c_k = 0.05;
  const long small = Plan(problem, cfg).T;
  cfg.c_k = 0.45;
  EXPECT_GT(Plan(problem, cfg).T, small);
  cfg.c_k = 0.05;
  cfg.w_scale_override.reset();
  EXPECT_LT(small, Plan(problem, cfg).T);
}

TEST(Plan, TildeHorizonNotLongerForSmallCk) {
  const DrfProblem problem = PlanningProblem(2, 500, 5, 1.0, 0.5, 0.3);
  SolverConfig cfg = PlanningConfig();
  cfg.epsilon = 0.1;
  for (double ck = 0.01; ck < 0.25; ck += 0.02) {
    cfg.c_k = ck;
    const Schedule s = Plan(problem, cfg);
    EXPECT_LE(s.T_tilde, s.T) << ck;
    EXPECT_GT(s.T_tilde, 0);
  }
  cfg.c_k = 0.4;
  EXPECT_EQ(Plan(problem, cfg).T_tilde, 0);
}

TEST(Plan, KappasAndStepConstants) {
  const DrfProblem problem = PlanningProblem(2, 100, 4, 1.5, 0.7, 0.4);
  SolverConfig cfg = PlanningConfig();
  cfg.epsilon = 0.2;
  cfg.w_scale_override.reset();
  const Schedule s = Plan(problem, cfg);
  const PlanConstants& pc = s.constants;
  const double Tt = double(s.T_tilde);
  EXPECT_DOUBLE_EQ(pc.w_scale, 3.0 * std::sqrt(pc.omega));
  EXPECT_NEAR(s.kappa_bullet, pc.w_scale * XRegretBound(problem, pc, Tt) / cfg.epsilon + cfg.c_k, 1e-15);
  EXPECT_NEAR(s.kappa_circ, pc.w_scale * PRegretBound(problem, cfg, pc, 0, Tt) / cfg.epsilon, 1e-15);
  EXPECT_NEAR(s.c_x, std::sqrt(pc.diameter_x / pc.omega) / (pc.sum_bound * 0.7), 1e-15);
  ASSERT_EQ(s.c_p.size(), 2u);
  EXPECT_NEAR(s.c_p[0], 2 * cfg.delta / (pc.sum_bound * 0.4 * 1e4) * std::sqrt(cfg.rho / pc.omega), 1e-18);
}

TEST(Plan, RejectsZeroLipschitz) {
  DrfProblem problem = PlanningProblem(1, 10, 2, 1.0, 0.5, 0.5);
  problem.lipschitz = 0.0;
  EXPECT_THROW(Plan(problem, PlanningConfig()), std::invalid_argument);
}

TEST(SampleSize, HoeffdingReferenceValue) {
  const DrfProblem problem = PlanningProblem(3, 10, 2, 1.0, 0.25, 0.25);
  SolverConfig cfg;
  cfg.c_k = 0.05;
  cfg.epsilon = 0.02;
  cfg.nu1 = 0.05;
  const long k = SampleSizeHoeffding(problem, cfg, 100000);
  EXPECT_EQ(k, long(std::ceil(5e5 * std::log(1.2e7))));
  EXPECT_NEAR(double(k), 8.15e6, 0.01e6);
}

TEST(SampleSize, HoeffdingScaling) {
  SolverConfig cfg;
  cfg.c_k = 0.05;
  cfg.epsilon = 0.02;
  cfg.nu1 = 0.05;
  const double base = double(SampleSizeHoeffding(PlanningProblem(3, 10, 2, 1.0, 0.25, 0.25), cfg, 100000));
  const double doubled = double(SampleSizeHoeffding(PlanningProblem(3, 10, 2, 1.0, 0.25, 0.5), cfg, 100000));
  EXPECT_NEAR(doubled / base, 4.0, 4.0 / base);
  cfg.nu1 = 0.025;
  const double halved = double(SampleSizeHoeffding(PlanningProblem(3, 10, 2, 1.0, 0.25, 0.25), cfg, 100000));
  EXPECT_NEAR(halved - base, 5e5 * std::log(2.0), 1.0);
}

TEST(SampleSize, BennettReferenceAndTrends) {
  const DrfProblem problem = PlanningProblem(2, 10, 2, 1.0, 0.25, 0.25);
  SolverConfig cfg;
  cfg.c_k = 0.05;
  cfg.epsilon = 0.02;
  cfg.nu1 = 0.05;
  // t = 2 * 0.25 * 0.05 * 0.02 / 0.01 = 0.05
  const double t = 0.05;
  const double h = 1.05 * std::log(1.05) - 0.05;
  const double expected = 4 * 0.0625 / 0.01 / h * std::log(2 * 2 * 1e5 / 0.05);
  EXPECT_NEAR(t, 2 * 0.25 * 0.05 * 0.02 / 0.01, 1e-15);
  EXPECT_EQ(SampleSizeBennett(problem, cfg, 100000, 0.01), long(std::ceil(expected)));
  EXPECT_LT(SampleSizeBennett(problem, cfg, 100000, 0.01), SampleSizeHoeffding(problem, cfg, 100000));

  SolverConfig coarse = cfg;
  coarse.epsilon = 0.1;
  SolverConfig fine = cfg;
  fine.epsilon = 0.001;
  EXPECT_GT(SampleSizeBennett(problem, fine, 1000, 0.01), SampleSizeBennett(problem, coarse, 1000, 0.01));
  EXPECT_THROW(SampleSizeBennett(problem, cfg, 1000, 0.0), std::invalid_argument);
}

TEST(ThetaWeights, NormalizedAndProportionalToStepSize) {
  for (long T : {1L, 7L, 1000L, 123457L}) {
    const auto theta = ThetaWeights(T);
    double sum = 0.0;
    for (double w : theta) sum += w;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    for (long t = 1; t < std::min<long>(T, 50); ++t) {
      EXPECT_NEAR(theta[t] / theta[0], 1.0 / std::sqrt(double(t + 1)), 1e-14);
    }
  }
}

TEST(EstimateHistory, WeightedMaxMatchesThetaWeights) {
  EstimateHistory history{2, {}};
  Rng rng(1);
  std::vector<double> a, b;
  for (int t = 0; t < 40; ++t) {
    const double row[2] = {rng.Uniform(), rng.Uniform() - 0.1};
    a.push_back(row[0]);
    b.push_back(row[1]);
    history.Append(row);
  }
  const auto theta = ThetaWeights(40);
  double wa = 0, wb = 0;
  for (int t = 0; t < 40; ++t) {
    wa += theta[t] * a[t];
    wb += theta[t] * b[t];
  }
  EXPECT_NEAR(history.WeightedMax(), std::max(wa, wb), 1e-14);
}

// Constraint value equals the constant c at every scenario; phi = c * sum(p).
DrfProblem ConstantPhiProblem(double phi_value) {
  return TableProblem(Eigen::MatrixXd::Constant(1, 4, phi_value / 4.0 / 0.25), {},
                      std::make_shared<EuclideanBall>(1, 1.0));
}

TEST(ExactFeasibilityTest, Branches) {
  const std::vector<Vector> p = {Vector::Constant(4, 0.25)};
  const Vector x = Vector::Zero(1);
  EXPECT_TRUE(ExactFeasibilityTest(ConstantPhiProblem(0.2), x, p, 0.5).feasible());
  EXPECT_FALSE(ExactFeasibilityTest(ConstantPhiProblem(0.3), x, p, 0.5).feasible());
  EXPECT_TRUE(ExactFeasibilityTest(ConstantPhiProblem(0.25), x, p, 0.5).feasible());
  const Certificate infeasible = ExactFeasibilityTest(ConstantPhiProblem(0.3), x, p, 0.5);
  EXPECT_FALSE(infeasible.x_bar.has_value());
  EXPECT_EQ(infeasible.p_bar.size(), 1u);
}

TEST(EfficientFeasibilityTest, ThresholdBranches) {
  auto run = [](double value) {
    EstimateHistory history{1, {}};
    history.Append(std::vector<double>{value});
    return EfficientFeasibilityTest(history, 1, 0.3, 0.05, 1.0, Vector::Zero(1), {});
  };
  EXPECT_TRUE(run(0.1).feasible());
  EXPECT_FALSE(run(0.4).feasible());
  EXPECT_EQ(run(0.1).source, CertificateSource::kEfficientTest);
  EstimateHistory short_history{1, {}};
  EXPECT_THROW(EfficientFeasibilityTest(short_history, 3, 0.3, 0.05, 1.0, Vector::Zero(1), {}),
               std::invalid_argument);
}

SolverConfig ToyConfig(std::uint64_t seed) {
  SolverConfig cfg;
  cfg.epsilon = 0.1;
  cfg.k = SampleSizeRule::Fixed(8);
  cfg.seed = seed;
  cfg.max_iters_override = 400;
  return cfg;
}

TEST(RunFeasibility, ToyVerdicts) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto infeasible = RunFeasibility(MakeConstantToy(2, 16, 2, 0.5), ToyConfig(seed));
    EXPECT_FALSE(infeasible.certificate.feasible());
    EXPECT_EQ(infeasible.certificate.source, CertificateSource::kExactTest);
    const auto feasible = RunFeasibility(MakeLinearBallToy(16, 2, -1.0, seed), ToyConfig(seed));
    EXPECT_TRUE(feasible.certificate.feasible());
    EXPECT_EQ(feasible.trace.iterations, 400);
  }
}

TEST(RunFeasibility, OfoModeVerdicts) {
  SolverConfig cfg = ToyConfig(1);
  cfg.mode = Mode::kOfo;
  EXPECT_FALSE(RunFeasibility(MakeConstantToy(1, 16, 2, 0.5), cfg).certificate.feasible());
  EXPECT_TRUE(RunFeasibility(MakeLinearBallToy(16, 2, -1.0, 1), cfg).certificate.feasible());
}

TEST(RunFeasibility, DeterministicReplay) {
  SolverConfig cfg = ToyConfig(9);
  cfg.sp_gap_every = 50;
  const DrfProblem problem = MakeLinearBallToy(20, 3, -0.3, 4);
  const auto a = RunFeasibility(problem, cfg);
  const auto b = RunFeasibility(problem, cfg);
  EXPECT_EQ(a.x_bar, b.x_bar);
  ASSERT_EQ(a.p_bar.size(), b.p_bar.size());
  for (size_t i = 0; i < a.p_bar.size(); ++i) EXPECT_EQ(a.p_bar[i], b.p_bar[i]);
  ASSERT_EQ(a.trace.checkpoints.size(), b.trace.checkpoints.size());
  for (size_t c = 0; c < a.trace.checkpoints.size(); ++c) {
    EXPECT_EQ(a.trace.checkpoints[c].t, b.trace.checkpoints[c].t);
    EXPECT_EQ(a.trace.checkpoints[c].sp_gap, b.trace.checkpoints[c].sp_gap);
    EXPECT_EQ(a.trace.checkpoints[c].phi, b.trace.checkpoints[c].phi);
  }
  EXPECT_EQ(a.certificate.kind, b.certificate.kind);
}

TEST(RunFeasibility, ThreadCountDoesNotChangeIterates) {
  SolverConfig cfg = ToyConfig(3);
  const DrfProblem problem = BuildParamSelect(GenParamSelect(3, 4, 3, 50, 0.05, 2));
  const auto serial = RunFeasibility(problem, cfg);
  cfg.threads = 3;
  const auto parallel = RunFeasibility(problem, cfg);
  EXPECT_EQ(serial.x_bar, parallel.x_bar);
}

TEST(RunFeasibility, CertificateSourceMatchesPath) {
  SolverConfig cfg = ToyConfig(2);
  cfg.sp_gap_every = 25;
  cfg.max_iters_override = 5000;
  const auto result = RunFeasibility(MakeLinearBallToy(16, 2, -1.0, 2), cfg);
  ASSERT_FALSE(result.trace.checkpoints.empty());
  for (size_t c = 1; c < result.trace.checkpoints.size(); ++c) {
    EXPECT_GT(result.trace.checkpoints[c].t, result.trace.checkpoints[c - 1].t);
  }
  if (result.trace.iterations < 5000) {
    EXPECT_EQ(result.certificate.source, CertificateSource::kEarlyStopSpGap);
    EXPECT_LE(result.trace.checkpoints.back().sp_gap, cfg.epsilon / 2);
  } else {
    EXPECT_EQ(result.certificate.source, CertificateSource::kExactTest);
  }
  EXPECT_EQ(result.trace.source, result.certificate.source);
  EXPECT_TRUE(result.certificate.x_bar.has_value() == result.certificate.feasible());

  cfg.sp_gap_every.reset();
  cfg.max_iters_override = 60;
  cfg.feasibility_test = TestKind::kEfficient;
  const auto efficient = RunFeasibility(MakeLinearBallToy(16, 2, -1.0, 2), cfg);
  EXPECT_EQ(efficient.certificate.source, CertificateSource::kEfficientTest);
}

TEST(RunFeasibility, RejectsEfficientTestInOfoMode) {
  SolverConfig cfg = ToyConfig(0);
  cfg.mode = Mode::kOfo;
  cfg.feasibility_test = TestKind::kEfficient;
  EXPECT_THROW(RunFeasibility(MakeConstantToy(1, 16, 2, 0.5), cfg), std::invalid_argument);
}

TEST(RunFeasibility, OracleFailureNamesIteration) {
  DrfProblem problem = MakeConstantToy(1, 16, 2, 0.5);
  problem.oracle = std::make_shared<testing::NanOracle>();
  try {
    RunFeasibility(problem, ToyConfig(0));
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("iteration 1"), std::string::npos) << e.what();
  }
}

TEST(WarmStart, ProjectsMarginalPointsAndRejectsFarOnes) {
  const DrfProblem problem = MakeLinearBallToy(16, 2, -1.0, 0);
  const Chi2Set set(16, 5.0, 0.9);
  WarmStart warm{Vector::Zero(2), std::vector<Vector>(1, set.Uniform())};
  warm.x << 1.0 + 5e-7, 0.0;
  EXPECT_NO_THROW(RunFeasibility(problem, ToyConfig(0), &warm));
  warm.x << 1.1, 0.0;
  EXPECT_THROW(RunFeasibility(problem, ToyConfig(0), &warm), std::invalid_argument);
  warm.x.setZero();
  warm.p[0].setConstant(0.01);
  EXPECT_THROW(RunFeasibility(problem, ToyConfig(0), &warm), std::invalid_argument);
}

TEST(WarmStart, SerializationRoundTrip) {
  WarmStart warm{Vector::Zero(3), {Vector::Constant(4, 0.25), Vector::Constant(4, 0.3)}};
  warm.x << 0.1, -2.5, 1e-17;
  const WarmStartMeta meta{4, 2, 3, 1.5, 0.9};
  WarmStartMeta parsed;
  const WarmStart back = ParseWarmStart(SerializeWarmStart(warm, meta), &parsed);
  EXPECT_EQ(back.x, warm.x);
  EXPECT_EQ(back.p[1], warm.p[1]);
  EXPECT_EQ(parsed.n, 4);
  EXPECT_EQ(parsed.rho, 1.5);
  EXPECT_THROW(ParseWarmStart(R"({"x":[0],"p":[[1,2]],"meta":{"n":3,"m":1,"d":1,"rho":1,"delta":0.5}})"),
               std::invalid_argument);
}

TEST(WarmStart, RarelySlowerThanColdStart) {
  int not_slower = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const DrfProblem problem = MakeLinearBallToy(16, 2, -0.2, 100 + seed);
    SolverConfig cfg = ToyConfig(seed);
    cfg.sp_gap_every = 20;
    cfg.max_iters_override = 4000;
    const auto cold = RunFeasibility(problem, cfg);
    WarmStart warm{cold.x_bar, cold.p_bar};
    cfg.seed = seed + 1000;
    const auto hot = RunFeasibility(problem, cfg, &warm);
    not_slower += hot.trace.iterations <= cold.trace.iterations;
  }
  EXPECT_GE(not_slower, 16);
}

TEST(SolverConfig, ValidationNamesKeys) {
  auto message = [](SolverConfig cfg) {
    try {
      cfg.Validate();
    } catch (const std::invalid_argument& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  SolverConfig cfg;
  cfg.c_k = 0.5;
  EXPECT_NE(message(cfg).find("c_k"), std::string::npos);
  cfg = {};
  cfg.c_k = 0.4;
  cfg.feasibility_test = TestKind::kEfficient;
  EXPECT_NE(message(cfg).find("c_k"), std::string::npos);
  cfg = {};
  cfg.epsilon = 0.0;
  EXPECT_NE(message(cfg).find("epsilon"), std::string::npos);
  cfg = {};
  cfg.mode = Mode::kOfo;
  cfg.feasibility_test = TestKind::kEfficient;
  EXPECT_NE(message(cfg).find("feasibility_test"), std::string::npos);
  cfg = {};
  cfg.k = SampleSizeRule::Bennett(0.0);
  EXPECT_NE(message(cfg).find("'k'"), std::string::npos);
  EXPECT_EQ(message(SolverConfig{}), "");
}

// Linear objective over the simplex: threshold c is feasible when
// min_x sup_p p'(A x - c) <= 0.
struct SimplexObjective {
  DrfProblem base;
  Eigen::MatrixXd slopes;
};

SimplexObjective MakeSimplexObjective() {
  Eigen::MatrixXd slopes(4, 3);
  slopes << 0.9, 0.2, 0.5, 0.1, 0.8, 0.4, 0.6, 0.3, 0.2, 0.7, 0.9, 0.3;
  DrfProblem base = TableProblem(Eigen::MatrixXd::Zero(1, 4), {slopes}, MakeEntropySimplex(3));
  base.bounds = {1.0};
  return {std::move(base), slopes};
}

double GridOptimum(const Eigen::MatrixXd& slopes, double rho, double delta) {
  const auto set = oracle::FlooredBall::Chi2(4, rho, delta);
  // sup_p p'(f - c) = 0 at c*(x); c*(x) solves a scalar equation, bisect it.
  auto threshold = [&](const Vector& x) {
    const Vector f = slopes * x;
    double lo = f.minCoeff() - 1, hi = f.maxCoeff() + 1;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (oracle::EnumerateSupLinear(set, f - Vector::Constant(4, mid)) > 0 ? lo : hi) = mid;
    }
    return hi;
  };
  double best = 1e300;
  const int steps = 200;
  for (int a = 0; a <= steps; ++a) {
    for (int b = 0; a + b <= steps; ++b) {
      Vector x(3);
      x << double(a) / steps, double(b) / steps, double(steps - a - b) / steps;
      best = std::min(best, threshold(x));
    }
  }
  return best;
}

TEST(OptimizeBinarySearch, DegenerateBracketSolvesOnce) {
  const SimplexObjective toy = MakeSimplexObjective();
  SolverConfig cfg = ToyConfig(0);
  cfg.rho = 0.1;
  SearchOptions options;
  options.obj_tol = 0.25;
  const auto result = OptimizeBinarySearch(ShiftedFamily(toy.base), cfg, 0.75, 1.0, options);
  EXPECT_EQ(result.value, 1.0);
  EXPECT_EQ(result.stages.size(), 1u);
}

TEST(OptimizeBinarySearch, RejectsInvalidBracket) {
  const SimplexObjective toy = MakeSimplexObjective();
  SolverConfig cfg = ToyConfig(0);
  cfg.rho = 0.1;
  SearchOptions options;
  options.obj_tol = 0.01;
  EXPECT_THROW(OptimizeBinarySearch(ShiftedFamily(toy.base), cfg, -1.0, -0.5, options),
               std::invalid_argument);
  EXPECT_THROW(OptimizeBinarySearch(ShiftedFamily(toy.base), cfg, 0.9, 1.0, options),
               std::invalid_argument);
}

TEST(OptimizeBinarySearch, MatchesGridOracle) {
  const SimplexObjective toy = MakeSimplexObjective();
  const double rho = 0.1, delta = 0.9;
  const double optimum = GridOptimum(toy.slopes, rho, delta);
  SearchOptions options;
  options.obj_tol = 0.005;
  std::vector<double> values;
  for (double eps : {0.2, 0.1, 0.05}) {
    SolverConfig cfg;
    cfg.epsilon = eps;
    cfg.rho = rho;
    cfg.delta = delta;
    cfg.mode = Mode::kOfo;
    cfg.sp_gap_every = 20;
    cfg.w_scale_override = 1.0;
    const auto result = OptimizeBinarySearch(ShiftedFamily(toy.base), cfg, 0.0, 1.0, options);
    EXPECT_NEAR(result.value, optimum, eps + options.obj_tol) << eps;
    values.push_back(result.value);
  }
  // A looser tolerance can only certify lower thresholds.
  EXPECT_LE(values[0], values[1] + options.obj_tol);
  EXPECT_LE(values[1], values[2] + options.obj_tol);
}

}  // namespace
}  // namespace drf
