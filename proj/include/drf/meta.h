#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drf/ambiguity.h"
#include "drf/core.h"
#include "drf/spgap.h"

namespace drf {

enum class Mode { kSofo, kOfo };
enum class TestKind { kExact, kEfficient };

struct SampleSizeRule {
  enum class Kind { kFixed, kHoeffding, kBennett };
  Kind kind = Kind::kFixed;
  long fixed = 100;
  double sigma_sq = 0.0;  // variance bound for the Bennett rule

  static SampleSizeRule Fixed(long k) { return {Kind::kFixed, k, 0.0}; }
  static SampleSizeRule Hoeffding() { return {Kind::kHoeffding, 0, 0.0}; }
  static SampleSizeRule Bennett(double sigma_sq) { return {Kind::kBennett, 0, sigma_sq}; }
};

struct SolverConfig {
  double epsilon = 0.1;
  double c_k = 0.05;
  double nu0 = 0.05;
  double nu1 = 0.05;
  std::optional<double> omega_override;
  // C_s: replaces the multiplier 3 sqrt(Omega) in the iteration bounds.
  std::optional<double> w_scale_override;
  // Replaces the mass bound 1 + sqrt(2 rho / n).
  std::optional<double> sum_bound_override;
  SampleSizeRule k;
  Mode mode = Mode::kSofo;
  std::optional<long> sp_gap_every;
  std::optional<long> max_iters_override;
  TestKind feasibility_test = TestKind::kExact;
  std::uint64_t seed = 0;
  int inner_min_budget = 2000;
  double rho = 5.0;
  double delta = 0.9;
  SamplerMode sampler = SamplerMode::kFenwick;
  int threads = 1;

  // Throws std::invalid_argument naming the offending field.
  void Validate() const;
};

// Constants shared by the iteration bounds and the step sizes.
struct PlanConstants {
  double omega = 1.0;
  double w_scale = 3.0;
  double sum_bound = 1.0;  // C_g
  double diameter_x = 0.0;
};

PlanConstants ResolveConstants(const DrfProblem& problem, const SolverConfig& cfg);

// Regret-rate terms evaluated at horizon T.
double XRegretBound(const DrfProblem& problem, const PlanConstants& pc, double T);
double PRegretBound(const DrfProblem& problem, const SolverConfig& cfg,
                    const PlanConstants& pc, int i, double T);

struct Schedule {
  long T = 0;
  // Horizon for the efficient test; 0 when its bound cannot be met (C_K >= 1/3).
  long T_tilde = 0;
  double c_x = 0.0;
  std::vector<double> c_p;  // one per constraint
  PlanConstants constants;
  double kappa_bullet = 0.0;
  double kappa_circ = 0.0;
};

Schedule Plan(const DrfProblem& problem, const SolverConfig& cfg);

// Iterations the solve loop will run under cfg.
long RunHorizon(const SolverConfig& cfg, const Schedule& schedule);

long SampleSizeHoeffding(const DrfProblem& problem, const SolverConfig& cfg, long T);
long SampleSizeBennett(const DrfProblem& problem, const SolverConfig& cfg, long T,
                       double sigma_sq);
long ResolveSampleSize(const DrfProblem& problem, const SolverConfig& cfg, long T);

// theta_t proportional to 1/sqrt(t) over t = 1..T, normalized.
std::vector<double> ThetaWeights(long T);

// Row t holds the m estimates f_hat_t computed at x_t.
struct EstimateHistory {
  int m = 0;
  std::vector<double> values;

  long rows() const { return m == 0 ? 0 : static_cast<long>(values.size()) / m; }
  void Append(std::span<const double> row);
  // max_i sum_t theta_t f_hat_t^i with normalized 1/sqrt(t) weights.
  double WeightedMax() const;
};

Certificate ExactFeasibilityTest(const DrfProblem& problem, const Vector& x_bar,
                                 std::span<const Vector> p_bar, double epsilon);

Certificate EfficientFeasibilityTest(const EstimateHistory& history, long horizon,
                                     double kappa_bullet, double c_k, double epsilon,
                                     const Vector& x_bar, std::vector<Vector> p_bar);

struct Checkpoint {
  long t = 0;
  double sp_gap = 0.0;
  double phi = 0.0;
  double elapsed_s = 0.0;
};

struct Trace {
  std::vector<Checkpoint> checkpoints;
  long iterations = 0;
  double wall_time_s = 0.0;
  CertificateSource source = CertificateSource::kExactTest;
};

struct WarmStart {
  Vector x;
  std::vector<Vector> p;
};

struct FeasibilityResult {
  Certificate certificate;
  Trace trace;
  Vector x_bar;
  std::vector<Vector> p_bar;
  Schedule schedule;
  long horizon = 0;
  long K = 0;
};

FeasibilityResult RunFeasibility(const DrfProblem& problem, const SolverConfig& cfg,
                                 const WarmStart* warm = nullptr);

struct WarmStartMeta {
  int n = 0;
  int m = 0;
  int d = 0;
  double rho = 0.0;
  double delta = 0.0;
};

std::string SerializeWarmStart(const WarmStart& warm, const WarmStartMeta& meta);
WarmStart ParseWarmStart(const std::string& text, WarmStartMeta* meta = nullptr);

using ProblemFamily = std::function<DrfProblem(double threshold)>;

struct SearchOptions {
  double obj_tol = 1e-3;
  // Bisection stages start from the previous stage's averages. The bracket
  // checks always start cold.
  bool warm_start = true;
  // Skip the two solves that confirm hi is feasible and lo is not.
  bool trust_bracket = false;
};

struct SearchStage {
  double threshold = 0.0;
  bool feasible = false;
  long iterations = 0;
  double wall_time_s = 0.0;
  CertificateSource source = CertificateSource::kExactTest;
};

struct SearchResult {
  double value = 0.0;
  Vector x;
  std::vector<SearchStage> stages;
  Trace trace;  // of the solve that certified `value`
  long total_iterations = 0;
};

// Smallest certified-feasible threshold in [lo, hi] up to obj_tol. Stage s
// runs with seed cfg.seed + s.
SearchResult OptimizeBinarySearch(const ProblemFamily& family, const SolverConfig& cfg,
                                  double lo, double hi, const SearchOptions& options);

}  // namespace drf
