#include "drf/pupdate.h"

#include <stdexcept>

namespace drf {

BmdStepRecord BmdStep(const DrfProblem& problem, int i, const Vector& x, DistState& state,
                      double step, Rng& rng) {
  return BmdStepAt(problem, i, x, state, step, state.Sample(rng));
}

BmdStepRecord BmdStepAt(const DrfProblem& problem, int i, const Vector& x,
                        DistState& state, double step, int index) {
  if (!(step > 0.0)) throw std::invalid_argument("BMD step: step size must be > 0");
  BmdStepRecord record;
  record.sampled_index = index;
  const double current = state.value(index);
  record.estimator_value = state.sum1() * CheckedValue(problem, i, index, x) / current;
  const double moved = current + step * record.estimator_value;
  const OneSparseProjection proj =
      ProjectOneSparse(state.set(), state.sum1(), state.sum2(), current, moved);
  record.alpha_star = proj.alpha;
  state.AffineUpdate(proj.alpha, index, proj.touched_value);
  return record;
}

Vector OfoPStep(const DrfProblem& problem, const Chi2Set& set, int i, const Vector& x,
                const Vector& p, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("OFO p step: step size must be > 0");
  return Project(set, p + step * CheckedValues(problem, i, x));
}

}  // namespace drf
