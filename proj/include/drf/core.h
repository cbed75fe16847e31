#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "drf/mirror.h"
#include "drf/rng.h"

namespace drf {

// x -> w'F^i(x) for fixed nonnegative weights w, as a function of x alone.
class WeightedConstraint {
 public:
  virtual ~WeightedConstraint() = default;
  virtual double Value(const Vector& x) const = 0;
  // g += scale * (a subgradient at x).
  virtual void AddSubgradient(const Vector& x, double scale, Vector& g) const = 0;
};

// Scenario functions F^i_r over a shared support of size n. Implementations
// must be pure and safe to call concurrently.
class ConstraintOracle {
 public:
  virtual ~ConstraintOracle() = default;

  virtual double Value(int i, int r, const Vector& x) const = 0;
  // g += scale * (a subgradient of F^i_r at x).
  virtual void AddSubgradient(int i, int r, const Vector& x, double scale,
                              Vector& g) const = 0;

  // out[r] = F^i_r(x) for every r; out must already have size n.
  virtual void Values(int i, const Vector& x, Vector& out) const;
  // sum_k F^i_{rows[k]}(x), accumulated in order.
  virtual double SumValues(int i, std::span<const int> rows, const Vector& x) const;
  // g += sum_r weights[r] * (subgradient of F^i_r at x).
  virtual void AddWeightedSubgradient(int i, const Vector& x, const Vector& weights,
                                      Vector& g) const;
  // The default keeps a reference to this oracle and loops over scenarios;
  // oracles that are linear in x collapse the sum up front.
  virtual std::unique_ptr<WeightedConstraint> Weighted(int i, const Vector& weights) const;

  Vector Subgradient(int i, int r, const Vector& x, int dim) const;
};

struct DrfProblem {
  int m = 0;
  int n = 0;
  int d = 0;
  std::shared_ptr<const ConstraintOracle> oracle;
  // Lipschitz bound of every F^i_r in the domain's norm.
  double lipschitz = 0.0;
  // bounds[i] >= |F^i_r(x)| on the domain.
  std::vector<double> bounds;
  std::shared_ptr<const MirrorDomain> domain;
  // Starting decision; the domain center when absent.
  std::optional<Vector> x_init;

  double max_bound() const;
  Vector StartingPoint() const;
};

// Throws std::invalid_argument describing the first structural problem.
void CheckProblem(const DrfProblem& problem);

// F^i_r(x), throwing on NaN or infinity.
double CheckedValue(const DrfProblem& problem, int i, int r, const Vector& x);
// F^i(x) for all scenarios, throwing on NaN or infinity.
Vector CheckedValues(const DrfProblem& problem, int i, const Vector& x);

// max_i p_i' F^i(x).
double Phi(const DrfProblem& problem, const Vector& x, std::span<const Vector> p);

struct Violation {
  enum class Kind { kBound, kLipschitz, kNonFinite };
  Kind kind;
  int constraint;
  int scenario;
  double observed;  // |F| or the difference quotient
  double allowed;
  std::string ToString() const;
};

// Monte-Carlo spot check of the declared bounds and Lipschitz constant.
std::vector<Violation> ValidateProblem(const DrfProblem& problem, int samples, Rng& rng);

enum class CertificateKind { kEpsFeasible, kInfeasible };
enum class CertificateSource { kEarlyStopSpGap, kExactTest, kEfficientTest };

std::string ToString(CertificateKind kind);
std::string ToString(CertificateSource source);

struct Certificate {
  CertificateKind kind = CertificateKind::kEpsFeasible;
  std::optional<Vector> x_bar;  // set iff kind == kEpsFeasible
  std::vector<Vector> p_bar;    // set iff kind == kInfeasible
  double epsilon = 0.0;
  CertificateSource source = CertificateSource::kExactTest;

  bool feasible() const { return kind == CertificateKind::kEpsFeasible; }
};

// Weighted running mean of x_t and (optionally) p_t.
class RunningAverage {
 public:
  RunningAverage() = default;

  // p may be empty when distribution iterates are averaged elsewhere.
  void Update(double theta, const Vector& x, std::span<const Vector> p = {});

  double weight_sum() const { return weight_sum_; }
  const Vector& avg_x() const { return avg_x_; }
  const std::vector<Vector>& avg_p() const { return avg_p_; }

 private:
  double weight_sum_ = 0.0;
  Vector avg_x_;
  std::vector<Vector> avg_p_;
};

}  // namespace drf
