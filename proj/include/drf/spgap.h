#pragma once

#include <span>
#include <vector>

#include "drf/ambiguity.h"
#include "drf/core.h"

namespace drf {

struct SupOverP {
  double value = 0.0;
  int argmax = 0;
  std::vector<Vector> p_star;
};

// max_i sup over members p of p' F^i(x).
SupOverP SupOverDistributions(const DrfProblem& problem, const Chi2Set& set,
                              const Vector& x);

struct InfOverX {
  double value = 0.0;  // best objective seen: an upper bound on the infimum
  Vector x_min;
  int iterations = 0;
};

// min over x of max_i p_i' F^i(x) by mirror/projected subgradient descent
// with steps sqrt(2 D_x) / (||g||_* sqrt(k)).
InfOverX InfOverDecisions(const DrfProblem& problem, std::span<const Vector> p,
                          int budget);

struct GapReport {
  double sup_value = 0.0;
  int sup_argmax_constraint = 0;
  double inf_value = 0.0;
  double gap = 0.0;
  int inf_iterations_used = 0;
  double phi_at_pair = 0.0;
};

GapReport SpGap(const DrfProblem& problem, const Chi2Set& set, const Vector& x,
                std::span<const Vector> p, int budget);

}  // namespace drf
