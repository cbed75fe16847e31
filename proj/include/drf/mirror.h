#pragma once

#include <memory>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "drf/rng.h"

namespace drf {

using Vector = Eigen::VectorXd;

// Decision set X with the distance-generating function used by mirror descent.
class MirrorDomain {
 public:
  virtual ~MirrorDomain() = default;

  virtual int dim() const = 0;
  virtual std::string name() const = 0;

  // D_x: bound on the Bregman divergence from Center() to any member.
  virtual double diameter() const = 0;

  // B(y, x) = psi(y) - psi(x) - grad psi(x)'(y - x).
  virtual double Bregman(const Vector& y, const Vector& x) const = 0;

  // argmin over y in X of g'y + B(y, x) / step. Throws if x is not a member.
  virtual Vector ProxStep(const Vector& x, const Vector& g, double step) const = 0;

  // Euclidean projection onto X.
  virtual Vector Project(const Vector& x) const = 0;

  virtual bool Contains(const Vector& x, double tol) const = 0;
  virtual Vector Center() const = 0;
  virtual Vector SamplePoint(Rng& rng) const = 0;

  // Norm w.r.t. which psi is 1-strongly convex, and its dual.
  virtual double Norm(const Vector& v) const = 0;
  virtual double DualNorm(const Vector& g) const = 0;
};

class EuclideanBall final : public MirrorDomain {
 public:
  EuclideanBall(int dim, double radius);

  int dim() const override { return dim_; }
  std::string name() const override { return "euclidean-ball"; }
  double radius() const { return radius_; }
  double diameter() const override { return 2.0 * radius_ * radius_; }
  double Bregman(const Vector& y, const Vector& x) const override;
  Vector ProxStep(const Vector& x, const Vector& g, double step) const override;
  Vector Project(const Vector& x) const override;
  bool Contains(const Vector& x, double tol) const override;
  Vector Center() const override { return Vector::Zero(dim_); }
  Vector SamplePoint(Rng& rng) const override;
  double Norm(const Vector& v) const override { return v.norm(); }
  double DualNorm(const Vector& g) const override { return g.norm(); }

 private:
  int dim_;
  double radius_;
};

// J probability simplices of size L each, with the summed negative entropy.
// A single simplex is the J = 1 case.
class ProductOfSimplices final : public MirrorDomain {
 public:
  ProductOfSimplices(int blocks, int block_size);

  int dim() const override { return blocks_ * block_size_; }
  std::string name() const override;
  int blocks() const { return blocks_; }
  int block_size() const { return block_size_; }
  double diameter() const override;
  double Bregman(const Vector& y, const Vector& x) const override;
  Vector ProxStep(const Vector& x, const Vector& g, double step) const override;
  Vector Project(const Vector& x) const override;
  bool Contains(const Vector& x, double tol) const override;
  Vector Center() const override;
  Vector SamplePoint(Rng& rng) const override;
  // sqrt of the sum of squared per-block l1 norms, and its dual.
  double Norm(const Vector& v) const override;
  double DualNorm(const Vector& g) const override;

 private:
  int blocks_;
  int block_size_;
};

std::unique_ptr<ProductOfSimplices> MakeEntropySimplex(int dim);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// {x in R^d : x >= 0, sum x <= cap}, optionally followed by one extra
// coordinate clipped to an interval. Euclidean geometry on the whole vector.
class BudgetBox final : public MirrorDomain {
 public:
  BudgetBox(int items, double cap, std::optional<Interval> extra = std::nullopt);

  int dim() const override { return items_ + (extra_ ? 1 : 0); }
  std::string name() const override { return "budget-box"; }
  int items() const { return items_; }
  double cap() const { return cap_; }
  const std::optional<Interval>& extra() const { return extra_; }
  double diameter() const override;
  double Bregman(const Vector& y, const Vector& x) const override;
  Vector ProxStep(const Vector& x, const Vector& g, double step) const override;
  Vector Project(const Vector& x) const override;
  bool Contains(const Vector& x, double tol) const override;
  Vector Center() const override;
  Vector SamplePoint(Rng& rng) const override;
  double Norm(const Vector& v) const override { return v.norm(); }
  double DualNorm(const Vector& g) const override { return g.norm(); }

 private:
  int items_;
  double cap_;
  std::optional<Interval> extra_;
};

// Euclidean projection of v onto {y >= 0, sum y = total}; sort based.
Vector ProjectOntoSimplex(const Vector& v, double total);

}  // namespace drf
