#pragma once

#include <span>
#include <vector>

#include "drf/mirror.h"
#include "drf/rng.h"

namespace drf {

// {p in R^n : p >= delta/n, sum_r (n p_r - 1)^2 / (2n) <= rho/n}.
// Members are not normalized.
class Chi2Set {
 public:
  Chi2Set(int n, double rho, double delta);

  int n() const { return n_; }
  double rho() const { return rho_; }
  double delta() const { return delta_; }
  double floor() const { return delta_ / n_; }

  // Bound on sum(p) over members: 1 + sqrt(2 rho / n).
  double SumBound() const;
  // max of half the squared distance between members: 4 rho / n^2.
  double Diameter() const;
  double Divergence(const Vector& p) const;
  Vector Uniform() const { return Vector::Constant(n_, 1.0 / n_); }

 private:
  int n_;
  double rho_;
  double delta_;
};

bool Contains(const Chi2Set& set, const Vector& p, double tol);

// argmin over members p of ||p - w||^2 / 2 for a dense w.
Vector Project(const Chi2Set& set, const Vector& w);

// p(alpha) = max(delta/n, (1 - alpha) w + alpha/n), the primal point for a
// given dual variable, and n^2 (1 - alpha)^2 g'(alpha) for the dual g.
// The scaled slope is n^2 h(alpha) - rho with h = ||p(alpha) - 1/n||^2 / 2.
Vector PrimalFromAlpha(const Chi2Set& set, const Vector& w, double alpha);
double ScaledDualSlope(const Chi2Set& set, const Vector& w, double alpha);

struct OneSparseProjection {
  double alpha = 0.0;          // the optimal dual variable
  double touched_value = 0.0;  // projected value of the touched coordinate
};

// Projection of w, where w agrees with the member p except at one coordinate.
// Needs only sum(p), sum(p^2), and old/new values of that coordinate.
OneSparseProjection ProjectOneSparse(const Chi2Set& set, double sum1, double sum2,
                                     double old_value, double new_value);

struct SupLinearResult {
  double value = 0.0;
  Vector argmax;
  double lambda = 0.0;  // the multiplier of the divergence constraint
};

// max over members p of p'f.
SupLinearResult SupLinear(const Chi2Set& set, const Vector& f);

enum class SamplerMode { kFenwick, kCumulative };

// A member p held as p_r = scale * stored_r + shift so that the BMD update
// (a global affine map plus one coordinate change) costs O(log n).
class DistState {
 public:
  explicit DistState(const Chi2Set& set, SamplerMode mode = SamplerMode::kFenwick);
  DistState(const Chi2Set& set, const Vector& p, SamplerMode mode = SamplerMode::kFenwick);

  const Chi2Set& set() const { return set_; }
  int size() const { return set_.n(); }
  SamplerMode mode() const { return mode_; }

  double value(int r) const { return scale_ * stored_[r] + shift_; }
  double sum1() const { return sum1_; }
  double sum2() const { return sum2_; }
  Vector Materialize() const;

  // Sum of the first k entries of p.
  double PrefixSum(int k) const;

  // Smallest r with PrefixSum(r + 1) > u * sum1().
  int Sample(double u) const;
  int Sample(Rng& rng) const { return Sample(rng.Uniform()); }
  // Same draws as out.size() calls of Sample(rng); the tree walks run side
  // by side so their cache misses overlap.
  void SampleMany(Rng& rng, std::span<int> out) const;

  // p <- (1 - alpha) p + alpha/n, then p[touched] <- touched_value.
  void AffineUpdate(double alpha, int touched, double touched_value);

  struct AuditResult {
    double sum1_err = 0.0;
    double sum2_err = 0.0;
    double prefix_err = 0.0;
  };
  // O(n) recomputation of the cached sums and prefix structure.
  AuditResult Audit() const;

  // Adds theta * p to a running weighted sum without touching all n entries.
  void Accumulate(double theta);
  double accumulated_weight() const { return weight_; }
  // The weighted mean of the accumulated iterates.
  Vector Average() const;

 private:
  void Rebuild();
  void Flush(int r);
  void FenwickAdd(int r, double delta);
  double FenwickPrefix(int k) const;

  Chi2Set set_;
  SamplerMode mode_;
  std::vector<double> stored_;
  double scale_ = 1.0;
  double shift_ = 0.0;
  double sum1_ = 0.0;
  double sum2_ = 0.0;
  std::vector<double> tree_;        // 1-based Fenwick tree over stored_
  int top_bit_ = 0;                 // largest power of two <= n
  std::vector<double> cumulative_;  // cumulative mode only

  // Lazy averaging: scale_sum_ = sum theta_s * scale_s, shift_sum_ likewise.
  double weight_ = 0.0;
  double scale_sum_ = 0.0;
  double shift_sum_ = 0.0;
  std::vector<double> partial_;   // flushed contributions per coordinate
  std::vector<double> snapshot_;  // scale_sum_ at each coordinate's last flush
};

}  // namespace drf
