#include "drf/core.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace drf {
namespace {

class GenericWeighted final : public WeightedConstraint {
 public:
  GenericWeighted(const ConstraintOracle& oracle, int i, Vector weights)
      : oracle_(oracle), i_(i), weights_(std::move(weights)) {}

  double Value(const Vector& x) const override {
    Vector values(weights_.size());
    oracle_.Values(i_, x, values);
    return weights_.dot(values);
  }

  void AddSubgradient(const Vector& x, double scale, Vector& g) const override {
    oracle_.AddWeightedSubgradient(i_, x, scale * weights_, g);
  }

 private:
  const ConstraintOracle& oracle_;
  int i_;
  Vector weights_;
};

[[noreturn]] void ThrowNonFinite(int i, int r) {
  std::ostringstream msg;
  msg << "oracle returned a non-finite value for constraint " << i << ", scenario " << r;
  throw std::runtime_error(msg.str());
}

}  // namespace

void ConstraintOracle::Values(int i, const Vector& x, Vector& out) const {
  for (Eigen::Index r = 0; r < out.size(); ++r) out[r] = Value(i, static_cast<int>(r), x);
}

double ConstraintOracle::SumValues(int i, std::span<const int> rows, const Vector& x) const {
  double total = 0.0;
  for (int r : rows) total += Value(i, r, x);
  return total;
}

void ConstraintOracle::AddWeightedSubgradient(int i, const Vector& x,
                                              const Vector& weights, Vector& g) const {
  for (Eigen::Index r = 0; r < weights.size(); ++r) {
    if (weights[r] != 0.0) AddSubgradient(i, static_cast<int>(r), x, weights[r], g);
  }
}

std::unique_ptr<WeightedConstraint> ConstraintOracle::Weighted(int i,
                                                               const Vector& weights) const {
  return std::make_unique<GenericWeighted>(*this, i, weights);
}

Vector ConstraintOracle::Subgradient(int i, int r, const Vector& x, int dim) const {
  Vector g = Vector::Zero(dim);
  AddSubgradient(i, r, x, 1.0, g);
  return g;
}

double DrfProblem::max_bound() const {
  return bounds.empty() ? 0.0 : *std::max_element(bounds.begin(), bounds.end());
}

Vector DrfProblem::StartingPoint() const { return x_init ? *x_init : domain->Center(); }

void CheckProblem(const DrfProblem& problem) {
  if (problem.m < 1) throw std::invalid_argument("problem: m must be >= 1");
  if (problem.n < 2) throw std::invalid_argument("problem: n must be >= 2");
  if (problem.d < 1) throw std::invalid_argument("problem: d must be >= 1");
  if (!problem.oracle) throw std::invalid_argument("problem: missing oracle");
  if (!problem.domain) throw std::invalid_argument("problem: missing domain");
  if (problem.domain->dim() != problem.d) {
    throw std::invalid_argument("problem: domain dimension differs from d");
  }
  if (static_cast<int>(problem.bounds.size()) != problem.m) {
    throw std::invalid_argument("problem: need one bound per constraint");
  }
  for (double bound : problem.bounds) {
    if (!(bound >= 0.0) || !std::isfinite(bound)) {
      throw std::invalid_argument("problem: bounds must be finite and >= 0");
    }
  }
  if (!(problem.lipschitz >= 0.0) || !std::isfinite(problem.lipschitz)) {
    throw std::invalid_argument("problem: Lipschitz constant must be finite and >= 0");
  }
  if (problem.x_init && !problem.domain->Contains(*problem.x_init, 1e-9)) {
    throw std::invalid_argument("problem: initial point is outside the domain");
  }
}

double CheckedValue(const DrfProblem& problem, int i, int r, const Vector& x) {
  const double value = problem.oracle->Value(i, r, x);
  if (!std::isfinite(value)) ThrowNonFinite(i, r);
  return value;
}

Vector CheckedValues(const DrfProblem& problem, int i, const Vector& x) {
  Vector out(problem.n);
  problem.oracle->Values(i, x, out);
  if (!out.allFinite()) {
    for (int r = 0; r < problem.n; ++r) {
      if (!std::isfinite(out[r])) ThrowNonFinite(i, r);
    }
  }
  return out;
}

double Phi(const DrfProblem& problem, const Vector& x, std::span<const Vector> p) {
  if (static_cast<int>(p.size()) != problem.m) {
    throw std::invalid_argument("phi: need one distribution per constraint");
  }
  if (x.size() != problem.d) throw std::invalid_argument("phi: decision has wrong dimension");
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < problem.m; ++i) {
    if (p[i].size() != problem.n) {
      throw std::invalid_argument("phi: distribution has wrong length");
    }
    best = std::max(best, p[i].dot(CheckedValues(problem, i, x)));
  }
  return best;
}

std::string Violation::ToString() const {
  std::ostringstream out;
  switch (kind) {
    case Kind::kBound: out << "bound"; break;
    case Kind::kLipschitz: out << "lipschitz"; break;
    case Kind::kNonFinite: out << "non-finite"; break;
  }
  out << " violation at constraint " << constraint << ", scenario " << scenario
      << ": observed " << observed << " > allowed " << allowed;
  return out.str();
}

std::vector<Violation> ValidateProblem(const DrfProblem& problem, int samples, Rng& rng) {
  CheckProblem(problem);
  constexpr double kSlack = 1e-9;
  std::vector<Violation> report;
  for (int s = 0; s < samples; ++s) {
    const Vector x = problem.domain->SamplePoint(rng);
    const Vector y = problem.domain->SamplePoint(rng);
    const int i = static_cast<int>(rng() % static_cast<std::uint64_t>(problem.m));
    const int r = static_cast<int>(rng() % static_cast<std::uint64_t>(problem.n));
    const double fx = problem.oracle->Value(i, r, x);
    const double fy = problem.oracle->Value(i, r, y);
    if (!std::isfinite(fx) || !std::isfinite(fy)) {
      report.push_back({Violation::Kind::kNonFinite, i, r, fx, 0.0});
      continue;
    }
    const double bound = problem.bounds[i];
    const double worst = std::max(std::abs(fx), std::abs(fy));
    if (worst > bound * (1.0 + kSlack) + kSlack) {
      report.push_back({Violation::Kind::kBound, i, r, worst, bound});
    }
    const double distance = problem.domain->Norm(x - y);
    const double allowed = problem.lipschitz * distance;
    if (std::abs(fx - fy) > allowed * (1.0 + kSlack) + kSlack) {
      report.push_back({Violation::Kind::kLipschitz, i, r,
                        distance > 0 ? std::abs(fx - fy) / distance : std::abs(fx - fy),
                        problem.lipschitz});
    }
  }
  return report;
}

std::string ToString(CertificateKind kind) {
  return kind == CertificateKind::kEpsFeasible ? "feasible" : "infeasible";
}

std::string ToString(CertificateSource source) {
  switch (source) {
    case CertificateSource::kEarlyStopSpGap: return "early-stop-sp-gap";
    case CertificateSource::kExactTest: return "exact-test";
    case CertificateSource::kEfficientTest: return "efficient-test";
  }
  return "unknown";
}

void RunningAverage::Update(double theta, const Vector& x, std::span<const Vector> p) {
  if (!(theta > 0.0) || !std::isfinite(theta)) {
    throw std::invalid_argument("running average: weight must be positive");
  }
  weight_sum_ += theta;
  const double share = theta / weight_sum_;
  if (avg_x_.size() == 0) {
    avg_x_ = x;
  } else {
    avg_x_ += share * (x - avg_x_);
  }
  if (avg_p_.empty()) {
    avg_p_.assign(p.begin(), p.end());
  } else {
    if (p.size() != avg_p_.size()) {
      throw std::invalid_argument("running average: distribution count changed");
    }
    for (std::size_t i = 0; i < p.size(); ++i) avg_p_[i] += share * (p[i] - avg_p_[i]);
  }
}

}  // namespace drf
