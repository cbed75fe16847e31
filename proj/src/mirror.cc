#include "drf/mirror.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace drf {
namespace {

constexpr double kMembershipTol = 1e-9;
constexpr double kProbabilityFloor = 1e-300;

void CheckDims(const MirrorDomain& dom, const Vector& x, const Vector& g) {
  if (x.size() != dom.dim() || g.size() != dom.dim()) {
    throw std::invalid_argument(dom.name() + ": dimension mismatch in prox step");
  }
}

void CheckProxInputs(const MirrorDomain& dom, const Vector& x, const Vector& g,
                     double step) {
  CheckDims(dom, x, g);
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw std::invalid_argument(dom.name() + ": prox step size must be positive");
  }
  if (!g.allFinite()) {
    throw std::invalid_argument(dom.name() + ": non-finite subgradient");
  }
  if (!dom.Contains(x, kMembershipTol)) {
    throw std::invalid_argument(dom.name() + ": prox center is outside the domain");
  }
}

// Sum of n i.i.d. Exp(1) normalized: a uniform point of the simplex.
void FillDirichlet(Rng& rng, double* out, int n) {
  std::exponential_distribution<double> expo(1.0);
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    out[k] = expo(rng) + kProbabilityFloor;
    total += out[k];
  }
  for (int k = 0; k < n; ++k) out[k] /= total;
}

}  // namespace

Vector ProjectOntoSimplex(const Vector& v, double total) {
  const int n = static_cast<int>(v.size());
  std::vector<double> sorted(v.data(), v.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double shift = 0.0;
  for (int k = 0; k < n; ++k) {
    cumulative += sorted[k];
    const double candidate = (cumulative - total) / (k + 1);
    if (sorted[k] - candidate > 0.0) shift = candidate;
  }
  return (v.array() - shift).max(0.0).matrix();
}

// ---------------------------------------------------------------------------
// EuclideanBall

EuclideanBall::EuclideanBall(int dim, double radius) : dim_(dim), radius_(radius) {
  if (dim < 1) throw std::invalid_argument("euclidean-ball: dim must be >= 1");
  if (!(radius > 0.0)) throw std::invalid_argument("euclidean-ball: radius must be > 0");
}

double EuclideanBall::Bregman(const Vector& y, const Vector& x) const {
  return 0.5 * (y - x).squaredNorm();
}

Vector EuclideanBall::ProxStep(const Vector& x, const Vector& g, double step) const {
  CheckProxInputs(*this, x, g, step);
  return Project(x - step * g);
}

Vector EuclideanBall::Project(const Vector& x) const {
  const double norm = x.norm();
  if (norm <= radius_) return x;
  return x * (radius_ / norm);
}

bool EuclideanBall::Contains(const Vector& x, double tol) const {
  return x.size() == dim_ && x.allFinite() && x.norm() <= radius_ + tol;
}

Vector EuclideanBall::SamplePoint(Rng& rng) const {
  std::normal_distribution<double> normal;
  Vector direction(dim_);
  for (int k = 0; k < dim_; ++k) direction[k] = normal(rng);
  const double norm = direction.norm();
  if (norm == 0.0) return Center();
  const double r = radius_ * std::pow(rng.Uniform(), 1.0 / dim_);
  return direction * (r / norm);
}

// ---------------------------------------------------------------------------
// ProductOfSimplices

ProductOfSimplices::ProductOfSimplices(int blocks, int block_size)
    : blocks_(blocks), block_size_(block_size) {
  if (blocks < 1 || block_size < 1) {
    throw std::invalid_argument("simplex domain: block count and size must be >= 1");
  }
}

std::string ProductOfSimplices::name() const {
  return blocks_ == 1 ? "entropy-simplex" : "product-of-simplices";
}

double ProductOfSimplices::diameter() const {
  return blocks_ * std::log(static_cast<double>(block_size_));
}

double ProductOfSimplices::Bregman(const Vector& y, const Vector& x) const {
  double kl = 0.0;
  for (int k = 0; k < dim(); ++k) {
    if (y[k] > 0.0) kl += y[k] * std::log(y[k] / x[k]);
    kl += x[k] - y[k];
  }
  return kl;
}

Vector ProductOfSimplices::ProxStep(const Vector& x, const Vector& g,
                                    double step) const {
  CheckProxInputs(*this, x, g, step);
  Vector y(dim());
  for (int j = 0; j < blocks_; ++j) {
    const int base = j * block_size_;
    // Work with logs and subtract the max exponent so exp cannot overflow.
    double top = -std::numeric_limits<double>::infinity();
    for (int l = 0; l < block_size_; ++l) {
      const int k = base + l;
      y[k] = std::log(std::max(x[k], kProbabilityFloor)) - step * g[k];
      top = std::max(top, y[k]);
    }
    double total = 0.0;
    for (int l = 0; l < block_size_; ++l) {
      const int k = base + l;
      y[k] = std::max(std::exp(y[k] - top), kProbabilityFloor);
      total += y[k];
    }
    for (int l = 0; l < block_size_; ++l) y[base + l] /= total;
  }
  return y;
}

Vector ProductOfSimplices::Project(const Vector& x) const {
  Vector y(dim());
  for (int j = 0; j < blocks_; ++j) {
    y.segment(j * block_size_, block_size_) =
        ProjectOntoSimplex(x.segment(j * block_size_, block_size_), 1.0);
  }
  return y;
}

bool ProductOfSimplices::Contains(const Vector& x, double tol) const {
  if (x.size() != dim() || !x.allFinite()) return false;
  for (int j = 0; j < blocks_; ++j) {
    const auto block = x.segment(j * block_size_, block_size_);
    if (block.minCoeff() < -tol) return false;
    if (std::abs(block.sum() - 1.0) > tol) return false;
  }
  return true;
}

Vector ProductOfSimplices::Center() const {
  return Vector::Constant(dim(), 1.0 / block_size_);
}

Vector ProductOfSimplices::SamplePoint(Rng& rng) const {
  Vector x(dim());
  for (int j = 0; j < blocks_; ++j) {
    FillDirichlet(rng, x.data() + j * block_size_, block_size_);
  }
  return x;
}

double ProductOfSimplices::Norm(const Vector& v) const {
  double total = 0.0;
  for (int j = 0; j < blocks_; ++j) {
    const double l1 = v.segment(j * block_size_, block_size_).lpNorm<1>();
    total += l1 * l1;
  }
  return std::sqrt(total);
}

double ProductOfSimplices::DualNorm(const Vector& g) const {
  double total = 0.0;
  for (int j = 0; j < blocks_; ++j) {
    const double linf = g.segment(j * block_size_, block_size_).lpNorm<Eigen::Infinity>();
    total += linf * linf;
  }
  return std::sqrt(total);
}

std::unique_ptr<ProductOfSimplices> MakeEntropySimplex(int dim) {
  return std::make_unique<ProductOfSimplices>(1, dim);
}

// ---------------------------------------------------------------------------
// BudgetBox

BudgetBox::BudgetBox(int items, double cap, std::optional<Interval> extra)
    : items_(items), cap_(cap), extra_(extra) {
  if (items < 1) throw std::invalid_argument("budget-box: items must be >= 1");
  if (!(cap > 0.0)) throw std::invalid_argument("budget-box: cap must be > 0");
  if (extra_ && !(extra_->lo <= extra_->hi)) {
    throw std::invalid_argument("budget-box: extra interval must have lo <= hi");
  }
}

double BudgetBox::diameter() const {
  // Farthest pair in the capped simplex: two distinct vertices (or 0 and the
  // only vertex when there is one item).
  const double span_sq = (items_ >= 2 ? 2.0 : 1.0) * cap_ * cap_;
  const double extra_sq = extra_ ? std::pow(extra_->hi - extra_->lo, 2) : 0.0;
  return 0.5 * (span_sq + extra_sq);
}

double BudgetBox::Bregman(const Vector& y, const Vector& x) const {
  return 0.5 * (y - x).squaredNorm();
}

Vector BudgetBox::ProxStep(const Vector& x, const Vector& g, double step) const {
  CheckProxInputs(*this, x, g, step);
  return Project(x - step * g);
}

Vector BudgetBox::Project(const Vector& x) const {
  if (x.size() != dim()) throw std::invalid_argument("budget-box: dimension mismatch");
  Vector y = x;
  auto head = y.head(items_);
  const Vector clipped = x.head(items_).cwiseMax(0.0);
  if (clipped.sum() <= cap_) {
    head = clipped;
  } else {
    head = ProjectOntoSimplex(x.head(items_), cap_);
  }
  if (extra_) y[items_] = std::clamp(x[items_], extra_->lo, extra_->hi);
  return y;
}

bool BudgetBox::Contains(const Vector& x, double tol) const {
  if (x.size() != dim() || !x.allFinite()) return false;
  const auto head = x.head(items_);
  if (head.minCoeff() < -tol || head.sum() > cap_ + tol) return false;
  if (extra_ && (x[items_] < extra_->lo - tol || x[items_] > extra_->hi + tol)) {
    return false;
  }
  return true;
}

Vector BudgetBox::Center() const {
  Vector x(dim());
  x.head(items_).setConstant(cap_ / (2.0 * items_));
  if (extra_) x[items_] = 0.5 * (extra_->lo + extra_->hi);
  return x;
}

Vector BudgetBox::SamplePoint(Rng& rng) const {
  // Uniform on the capped simplex: a Dirichlet point with one slack coordinate.
  std::vector<double> w(items_ + 1);
  FillDirichlet(rng, w.data(), items_ + 1);
  Vector x(dim());
  for (int k = 0; k < items_; ++k) x[k] = cap_ * w[k];
  if (extra_) x[items_] = extra_->lo + (extra_->hi - extra_->lo) * rng.Uniform();
  return x;
}

}  // namespace drf
