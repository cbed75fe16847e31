#include "drf/xupdate.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "parallel.h"

namespace drf {

int ArgMaxLowest(std::span<const double> values) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

IndexEstimate ApproxMaxIndex(const DrfProblem& problem, const Vector& x,
                             std::span<const DistState> states, int K,
                             const StreamKey& key, bool keep_samples, int threads) {
  if (K < 1) throw std::invalid_argument("approx max index: K must be >= 1");
  if (static_cast<int>(states.size()) != problem.m) {
    throw std::invalid_argument("approx max index: need one distribution per constraint");
  }
  IndexEstimate est;
  est.f_hat.assign(problem.m, 0.0);
  if (keep_samples) est.samples.assign(problem.m, {});
  internal::ParallelFor(problem.m, threads, [&](int i) {
    const DistState& state = states[i];
    if (K >= problem.n) {
      est.f_hat[i] = state.Materialize().dot(CheckedValues(problem, i, x));
      return;
    }
    Rng rng = key.For(Stream::kIndexEstimate, static_cast<std::uint64_t>(i));
    std::vector<int> rows(K);
    state.SampleMany(rng, rows);
    const double total = problem.oracle->SumValues(i, rows, x);
    if (!std::isfinite(total)) {
      for (int r : rows) CheckedValue(problem, i, r, x);  // throws naming the scenario
      throw std::runtime_error("oracle values overflow when summed");
    }
    if (keep_samples) est.samples[i] = std::move(rows);
    est.f_hat[i] = state.sum1() * total / K;
  });
  est.i_hat = ArgMaxLowest(est.f_hat);
  return est;
}

Vector SmdGradient(const DrfProblem& problem, int i, int r, const Vector& x,
                   const DistState& state) {
  Vector g = Vector::Zero(problem.d);
  problem.oracle->AddSubgradient(i, r, x, state.sum1(), g);
  if (!g.allFinite()) throw std::runtime_error("oracle returned a non-finite subgradient");
  return g;
}

SmdStep EpsSmdStep(const DrfProblem& problem, const Vector& x,
                   std::span<const DistState> states, int K, double step,
                   const StreamKey& key, int threads) {
  if (!(step > 0.0)) throw std::invalid_argument("eps-SMD step: step size must be > 0");
  SmdStep out;
  out.estimate = ApproxMaxIndex(problem, x, states, K, key, false, threads);
  const int i = out.estimate.i_hat;
  Rng rng = key.For(Stream::kDescent, 0);
  out.descent_index = states[i].Sample(rng);
  const Vector g = SmdGradient(problem, i, out.descent_index, x, states[i]);
  out.x_next = problem.domain->ProxStep(x, g, step);
  return out;
}

OfoXResult OfoXStep(const DrfProblem& problem, const Vector& x, std::span<const Vector> p,
                    double step) {
  if (!(step > 0.0)) throw std::invalid_argument("OFO x step: step size must be > 0");
  if (static_cast<int>(p.size()) != problem.m) {
    throw std::invalid_argument("OFO x step: need one distribution per constraint");
  }
  OfoXResult out;
  out.values.resize(problem.m);
  for (int i = 0; i < problem.m; ++i) out.values[i] = p[i].dot(CheckedValues(problem, i, x));
  out.i_star = ArgMaxLowest(out.values);
  Vector g = Vector::Zero(problem.d);
  problem.oracle->AddWeightedSubgradient(out.i_star, x, p[out.i_star], g);
  if (!g.allFinite()) throw std::runtime_error("oracle returned a non-finite subgradient");
  out.x_next = problem.domain->ProxStep(x, g, step);
  return out;
}

}  // namespace drf
