#include "drf/spgap.h"

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "drf/xupdate.h"

namespace drf {

SupOverP SupOverDistributions(const DrfProblem& problem, const Chi2Set& set,
                              const Vector& x) {
  SupOverP out;
  out.value = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < problem.m; ++i) {
    SupLinearResult sup = SupLinear(set, CheckedValues(problem, i, x));
    if (sup.value > out.value) {
      out.value = sup.value;
      out.argmax = i;
    }
    out.p_star.push_back(std::move(sup.argmax));
  }
  return out;
}

InfOverX InfOverDecisions(const DrfProblem& problem, std::span<const Vector> p,
                          int budget) {
  if (budget < 1) throw std::invalid_argument("inner minimization: budget must be >= 1");
  if (static_cast<int>(p.size()) != problem.m) {
    throw std::invalid_argument("inner minimization: need one distribution per constraint");
  }
  std::vector<std::unique_ptr<WeightedConstraint>> pieces;
  for (int i = 0; i < problem.m; ++i) pieces.push_back(problem.oracle->Weighted(i, p[i]));
  std::vector<double> values(problem.m);
  auto objective = [&](const Vector& x) {
    for (int i = 0; i < problem.m; ++i) values[i] = pieces[i]->Value(x);
    const int top = ArgMaxLowest(values);
    if (!std::isfinite(values[top])) {
      throw std::runtime_error("inner minimization: non-finite objective");
    }
    return top;
  };

  const MirrorDomain& domain = *problem.domain;
  const double reach = std::sqrt(2.0 * domain.diameter());
  InfOverX out;
  out.value = std::numeric_limits<double>::infinity();
  Vector x = problem.StartingPoint();
  Vector average = x;
  double average_weight = 0.0;
  Vector g(problem.d);
  for (int k = 1; k <= budget; ++k) {
    out.iterations = k;
    const int top = objective(x);
    if (values[top] < out.value) {
      out.value = values[top];
      out.x_min = x;
    }
    g.setZero();
    pieces[top]->AddSubgradient(x, 1.0, g);
    const double norm = domain.DualNorm(g);
    // A zero subgradient of the active piece means x minimizes the max.
    if (norm == 0.0 || reach == 0.0) break;
    const double step = reach / (norm * std::sqrt(static_cast<double>(k)));
    x = domain.ProxStep(x, g, step);

    average_weight += step;
    average += (step / average_weight) * (x - average);
    const int avg_top = objective(average);
    if (values[avg_top] < out.value) {
      out.value = values[avg_top];
      out.x_min = average;
    }
  }
  return out;
}

GapReport SpGap(const DrfProblem& problem, const Chi2Set& set, const Vector& x,
                std::span<const Vector> p, int budget) {
  GapReport report;
  const SupOverP sup = SupOverDistributions(problem, set, x);
  const InfOverX inf = InfOverDecisions(problem, p, budget);
  report.sup_value = sup.value;
  report.sup_argmax_constraint = sup.argmax;
  report.inf_value = inf.value;
  report.inf_iterations_used = inf.iterations;
  report.gap = sup.value - inf.value;
  report.phi_at_pair = Phi(problem, x, p);
  return report;
}

}  // namespace drf
