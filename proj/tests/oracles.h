// Independent reference implementations used to freeze expected values.
// None of these share code with the library paths they check.
#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

namespace drf::oracle {

using Vector = Eigen::VectorXd;

// The set {p >= floor, ||p - 1/n||^2 <= radius_sq}.
struct FlooredBall {
  int n = 0;
  double floor = 0.0;
  double radius_sq = 0.0;  // 2 rho / n^2

  static FlooredBall Chi2(int n, double rho, double delta) {
    return {n, delta / n, 2.0 * rho / (double(n) * n)};
  }
  bool Contains(const Vector& p, double tol) const;
};

// Dykstra's alternating projections onto the floor and the ball.
Vector DykstraProject(const FlooredBall& set, const Vector& w, int max_iters = 2000000,
                      double tol = 1e-15);

// Projection by enumerating which coordinates sit at the floor: for each
// choice, project the rest onto the ball slice, keep the nearest member.
Vector EnumerateProject(const FlooredBall& set, const Vector& w);

// max p'f over the set by enumerating which coordinates sit at the floor;
// exact for small n (2^n active sets).
double EnumerateSupLinear(const FlooredBall& set, const Vector& f, Vector* argmax = nullptr);

// argmin ||y - x||^2 over {y >= 0, sum y <= cap} in two dimensions by a grid
// of the given spacing, refined around the best cell.
Vector GridBudgetProjection2(const Vector& x, double cap, double spacing);

// argmin over the 2-simplex of g'y + KL(y, x) / step by golden-section search.
Vector GoldenEntropyProx2(const Vector& x, const Vector& g, double step);

// Number of monomials of total degree 2..degree in `vars` variables, by
// enumerating exponent vectors.
long CountMonomials(int vars, int degree);

// Smallest integer T >= from with pred(T) true by linear scan.
long LinearScan(long from, long to, const std::function<bool(long)>& pred);

// min over t in [lo, hi] of a unimodal function.
double GoldenSection(const std::function<double(double)>& f, double lo, double hi,
                     double tol = 1e-12);

}  // namespace drf::oracle
