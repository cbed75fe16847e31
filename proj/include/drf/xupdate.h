#pragma once

#include <span>
#include <vector>

#include "drf/ambiguity.h"
#include "drf/core.h"
#include "drf/rng.h"

namespace drf {

struct IndexEstimate {
  int i_hat = 0;
  // f_hat[i] estimates p_i' F^i(x), including the sum(p_i) factor.
  std::vector<double> f_hat;
  // Scenario draws per constraint; filled only on request.
  std::vector<std::vector<int>> samples;
};

// Index of the largest entry; ties go to the lowest index.
int ArgMaxLowest(std::span<const double> values);

// Estimates every p_i' F^i(x) from K draws r ~ p_i / sum(p_i) and returns the
// argmax. When K >= n the estimate is computed exactly over all scenarios.
// Draws for constraint i come from key.For(Stream::kIndexEstimate, i).
IndexEstimate ApproxMaxIndex(const DrfProblem& problem, const Vector& x,
                             std::span<const DistState> states, int K,
                             const StreamKey& key, bool keep_samples = false,
                             int threads = 1);

struct SmdStep {
  Vector x_next;
  IndexEstimate estimate;
  int descent_index = 0;
};

// One stochastic mirror descent step driven by the estimated max constraint.
SmdStep EpsSmdStep(const DrfProblem& problem, const Vector& x,
                   std::span<const DistState> states, int K, double step,
                   const StreamKey& key, int threads = 1);

// The stochastic subgradient sum(p_i) * dF^i_r(x) used by EpsSmdStep.
Vector SmdGradient(const DrfProblem& problem, int i, int r, const Vector& x,
                   const DistState& state);

struct OfoXResult {
  Vector x_next;
  int i_star = 0;
  std::vector<double> values;  // p_i' F^i(x) per constraint
};

// Deterministic step: exact max constraint and its full weighted subgradient.
OfoXResult OfoXStep(const DrfProblem& problem, const Vector& x, std::span<const Vector> p,
                    double step);

}  // namespace drf
