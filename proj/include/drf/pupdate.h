#pragma once

#include "drf/ambiguity.h"
#include "drf/core.h"
#include "drf/rng.h"

namespace drf {

struct BmdStepRecord {
  int sampled_index = 0;
  double estimator_value = 0.0;  // sum(p) * F_r(x) / p_r
  double alpha_star = 0.0;
};

// Bandit mirror ascent on p_i: one importance-weighted coordinate, then the
// one-sparse projection. Updates state in place.
BmdStepRecord BmdStep(const DrfProblem& problem, int i, const Vector& x, DistState& state,
                      double step, Rng& rng);

// Same step with the sampled scenario fixed by the caller.
BmdStepRecord BmdStepAt(const DrfProblem& problem, int i, const Vector& x,
                        DistState& state, double step, int index);

// Deterministic ascent: project(p + step * F^i(x)).
Vector OfoPStep(const DrfProblem& problem, const Chi2Set& set, int i, const Vector& x,
                const Vector& p, double step);

}  // namespace drf
