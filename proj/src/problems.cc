#include "drf/problems.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>

#ifdef __linux__
#include <sys/mman.h>
#endif

namespace drf {
namespace {

// Sampled rows of a large block each land on a different page; 2 MB pages
// keep those reads from also missing the TLB. Advice only applies to pages
// not yet touched, hence the copy into fresh storage.
void BackWithHugePages(Matrix& m) {
#ifdef __linux__
  constexpr std::size_t kHuge = std::size_t{2} << 20;
  const std::size_t bytes = sizeof(double) * static_cast<std::size_t>(m.size());
  if (bytes < 16 * kHuge) return;
  Matrix fresh(m.rows(), m.cols());
  const auto begin = reinterpret_cast<std::uintptr_t>(fresh.data());
  const std::uintptr_t lo = (begin + kHuge - 1) & ~(kHuge - 1);
  const std::uintptr_t hi = (begin + bytes) & ~(kHuge - 1);
  if (hi > lo) madvise(reinterpret_cast<void*>(lo), hi - lo, MADV_HUGEPAGE);
  fresh = m;
  m.swap(fresh);
#else
  (void)m;
#endif
}

double Softplus(double u) { return u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u)); }
double Sigmoid(double u) {
  if (u >= 0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

class LinearWeighted final : public WeightedConstraint {
 public:
  LinearWeighted(Vector v, double constant) : v_(std::move(v)), constant_(constant) {}
  double Value(const Vector& x) const override { return v_.dot(x) + constant_; }
  void AddSubgradient(const Vector&, double scale, Vector& g) const override {
    g.noalias() += scale * v_;
  }

 private:
  Vector v_;
  double constant_;
};

class ConstantOracle final : public ConstraintOracle {
 public:
  explicit ConstantOracle(double value) : value_(value) {}
  double Value(int, int, const Vector&) const override { return value_; }
  void AddSubgradient(int, int, const Vector&, double, Vector&) const override {}
  void Values(int, const Vector&, Vector& out) const override { out.setConstant(value_); }
  void AddWeightedSubgradient(int, const Vector&, const Vector&, Vector&) const override {}

 private:
  double value_;
};

}  // namespace

LinearOracle::LinearOracle(std::vector<Block> blocks) : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw std::invalid_argument("linear oracle: no blocks");
  for (const Block& b : blocks_) {
    if (b.effects.rows() != blocks_[0].effects.rows() ||
        b.effects.cols() != blocks_[0].effects.cols()) {
      throw std::invalid_argument("linear oracle: blocks differ in shape");
    }
  }
  for (Block& b : blocks_) BackWithHugePages(b.effects);
}

double LinearOracle::Value(int i, int r, const Vector& x) const {
  const Block& b = blocks_[i];
  return b.sign * b.effects.row(r).dot(x) + b.offset;
}

double LinearOracle::SumValues(int i, std::span<const int> rows, const Vector& x) const {
  const Block& b = blocks_[i];
  const Eigen::Index d = b.effects.cols();
  // Sampled rows are scattered; request a few ahead so the misses overlap.
  constexpr std::size_t kAhead = 8;
  auto prefetch = [&](int r) {
    const double* row = b.effects.row(r).data();
    for (Eigen::Index k = 0; k < d; k += 8) __builtin_prefetch(row + k);
  };
  for (std::size_t k = 0; k < std::min(kAhead, rows.size()); ++k) prefetch(rows[k]);
  double total = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (k + kAhead < rows.size()) prefetch(rows[k + kAhead]);
    total += b.sign * b.effects.row(rows[k]).dot(x) + b.offset;
  }
  return total;
}

void LinearOracle::AddSubgradient(int i, int r, const Vector&, double scale, Vector& g) const {
  const Block& b = blocks_[i];
  g.noalias() += (scale * b.sign) * b.effects.row(r).transpose();
}

void LinearOracle::Values(int i, const Vector& x, Vector& out) const {
  const Block& b = blocks_[i];
  out.noalias() = b.effects * x;
  out = b.sign * out.array() + b.offset;
}

void LinearOracle::AddWeightedSubgradient(int i, const Vector&, const Vector& weights,
                                          Vector& g) const {
  const Block& b = blocks_[i];
  g.noalias() += b.sign * (b.effects.transpose() * weights);
}

std::unique_ptr<WeightedConstraint> LinearOracle::Weighted(int i, const Vector& weights) const {
  const Block& b = blocks_[i];
  Vector v = b.sign * (b.effects.transpose() * weights);
  return std::make_unique<LinearWeighted>(std::move(v), b.offset * weights.sum());
}

// ---------------------------------------------------------------------------

DrfProblem MakeConstantToy(int m, int n, int d, double value) {
  DrfProblem problem;
  problem.m = m;
  problem.n = n;
  problem.d = d;
  problem.oracle = std::make_shared<ConstantOracle>(value);
  // Any positive constant bounds a zero subgradient; planning needs G > 0.
  problem.lipschitz = 1.0;
  problem.bounds.assign(m, std::max(std::abs(value), 1e-12));
  problem.domain = std::make_shared<EuclideanBall>(d, 1.0);
  return problem;
}

DrfProblem MakeLinearBallToy(int n, int d, double offset, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  LinearOracle::Block block;
  block.effects.resize(n, d);
  for (int r = 0; r < n; ++r) {
    Vector a(d);
    for (int j = 0; j < d; ++j) a[j] = normal(rng);
    a *= rng.Uniform() / std::max(a.norm(), 1e-300);
    block.effects.row(r) = a.transpose();
  }
  block.offset = offset;
  DrfProblem problem;
  problem.m = 1;
  problem.n = n;
  problem.d = d;
  problem.oracle = std::make_shared<LinearOracle>(std::vector<LinearOracle::Block>{block});
  problem.lipschitz = 1.0;
  problem.bounds = {1.0 + std::abs(offset)};
  problem.domain = std::make_shared<EuclideanBall>(d, 1.0);
  return problem;
}

namespace {

class ShiftedOracle final : public ConstraintOracle {
 public:
  ShiftedOracle(std::shared_ptr<const ConstraintOracle> base, double shift)
      : base_(std::move(base)), shift_(shift) {}

  double Value(int i, int r, const Vector& x) const override {
    return base_->Value(i, r, x) - (i == 0 ? shift_ : 0.0);
  }
  void AddSubgradient(int i, int r, const Vector& x, double scale, Vector& g) const override {
    base_->AddSubgradient(i, r, x, scale, g);
  }
  void Values(int i, const Vector& x, Vector& out) const override {
    base_->Values(i, x, out);
    if (i == 0) out.array() -= shift_;
  }
  void AddWeightedSubgradient(int i, const Vector& x, const Vector& weights,
                              Vector& g) const override {
    base_->AddWeightedSubgradient(i, x, weights, g);
  }
  std::unique_ptr<WeightedConstraint> Weighted(int i, const Vector& weights) const override {
    if (i != 0) return base_->Weighted(i, weights);
    return std::make_unique<ShiftedWeighted>(base_->Weighted(i, weights), shift_ * weights.sum());
  }

 private:
  class ShiftedWeighted final : public WeightedConstraint {
   public:
    ShiftedWeighted(std::unique_ptr<WeightedConstraint> base, double shift)
        : base_(std::move(base)), shift_(shift) {}
    double Value(const Vector& x) const override { return base_->Value(x) - shift_; }
    void AddSubgradient(const Vector& x, double scale, Vector& g) const override {
      base_->AddSubgradient(x, scale, g);
    }

   private:
    std::unique_ptr<WeightedConstraint> base_;
    double shift_;
  };

  std::shared_ptr<const ConstraintOracle> base_;
  double shift_;
};

}  // namespace

ProblemFamily ShiftedFamily(DrfProblem base) {
  CheckProblem(base);
  return [base = std::move(base)](double threshold) {
    DrfProblem problem = base;
    problem.oracle = std::make_shared<ShiftedOracle>(base.oracle, threshold);
    problem.bounds[0] += std::abs(threshold);
    return problem;
  };
}

// ---------------------------------------------------------------------------
// Fair logistic regression: F^0 = loss - rhs, F^{1,2} = +-(z - zbar) u - c
// with u = theta'x_r.

namespace {

class FairnessOracle final : public ConstraintOracle {
 public:
  FairnessOracle(std::shared_ptr<const FairnessLrSpec> spec) : spec_(std::move(spec)) {
    centered_ = spec_->sensitive.array() - spec_->sensitive.mean();
  }

  double Value(int i, int r, const Vector& x) const override {
    return FromMargin(i, r, spec_->features.row(r).dot(x));
  }

  void AddSubgradient(int i, int r, const Vector& x, double scale, Vector& g) const override {
    const double u = spec_->features.row(r).dot(x);
    g.noalias() += (scale * Slope(i, r, u)) * spec_->features.row(r).transpose();
  }

  void Values(int i, const Vector& x, Vector& out) const override {
    Vector margins = spec_->features * x;
    for (Eigen::Index r = 0; r < out.size(); ++r) out[r] = FromMargin(i, int(r), margins[r]);
  }

  void AddWeightedSubgradient(int i, const Vector& x, const Vector& weights,
                              Vector& g) const override {
    Vector margins = spec_->features * x;
    Vector coef(weights.size());
    for (Eigen::Index r = 0; r < coef.size(); ++r) {
      coef[r] = weights[r] * Slope(i, int(r), margins[r]);
    }
    g.noalias() += spec_->features.transpose() * coef;
  }

 private:
  double FromMargin(int i, int r, double u) const {
    if (i == 0) return Softplus(u) - spec_->labels[r] * u - spec_->loss_rhs;
    const double sign = i == 1 ? 1.0 : -1.0;
    return sign * centered_[r] * u - spec_->cov_bound;
  }
  double Slope(int i, int r, double u) const {
    if (i == 0) return Sigmoid(u) - spec_->labels[r];
    return (i == 1 ? 1.0 : -1.0) * centered_[r];
  }

  std::shared_ptr<const FairnessLrSpec> spec_;
  Vector centered_;
};

double DefaultRadius(int d) { return 5.0 * std::log(static_cast<double>(d)); }

FairnessBounds BoundsAtScale(const FairnessLrSpec& spec, double factor) {
  const double radius = spec.radius > 0 ? spec.radius : DefaultRadius(int(spec.features.cols()));
  const double zbar = spec.sensitive.mean();
  FairnessBounds out;
  for (Eigen::Index r = 0; r < spec.features.rows(); ++r) {
    const double norm = factor * spec.features.row(r).norm();
    const double kappa = radius * norm;
    const double dev = std::abs(spec.sensitive[r] - zbar);
    // The logistic loss of either label ranges over [softplus(-k), softplus(k)].
    const double loss = std::max(Softplus(kappa) - spec.loss_rhs, spec.loss_rhs - Softplus(-kappa));
    out.value_bound = std::max({out.value_bound, loss, dev * kappa + spec.cov_bound});
    out.lipschitz = std::max({out.lipschitz, Sigmoid(kappa) * norm, dev * norm});
  }
  return out;
}

bool WithinFairnessBounds(const FairnessBounds& b) {
  return b.value_bound <= kFairnessBound && b.lipschitz <= kFairnessBound;
}

void CheckFairnessData(const FairnessLrSpec& spec) {
  const auto n = spec.features.rows();
  if (n < 2 || spec.features.cols() < 1) throw std::invalid_argument("fairness: empty data");
  if (spec.labels.size() != n || spec.sensitive.size() != n) {
    throw std::invalid_argument("fairness: labels/sensitive length differs from feature rows");
  }
  if (!spec.features.allFinite() || !spec.labels.allFinite() || !spec.sensitive.allFinite()) {
    throw std::invalid_argument("fairness: non-finite data");
  }
  for (Eigen::Index r = 0; r < n; ++r) {
    if (spec.labels[r] != 0.0 && spec.labels[r] != 1.0) {
      throw std::invalid_argument("fairness: labels must be 0 or 1");
    }
  }
}

}  // namespace

FairnessBounds ComputeFairnessBounds(const FairnessLrSpec& spec) { return BoundsAtScale(spec, 1.0); }

void ScaleFeaturesForBounds(FairnessLrSpec& spec) {
  CheckFairnessData(spec);
  if (WithinFairnessBounds(BoundsAtScale(spec, 1.0))) return;
  if (!WithinFairnessBounds(BoundsAtScale(spec, 0.0))) {
    throw std::invalid_argument(
        "fairness: loss_rhs or cov_bound leave no room for the 0.25 bounds at any scale");
  }
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (WithinFairnessBounds(BoundsAtScale(spec, mid)) ? lo : hi) = mid;
  }
  spec.features *= lo;
}

DrfProblem BuildFairnessLr(const FairnessLrSpec& spec) {
  CheckFairnessData(spec);
  auto owned = std::make_shared<FairnessLrSpec>(spec);
  if (owned->radius <= 0) owned->radius = DefaultRadius(int(spec.features.cols()));
  const FairnessBounds bounds = ComputeFairnessBounds(*owned);
  if (!WithinFairnessBounds(bounds)) {
    std::ostringstream msg;
    msg << "fairness: worst-case |F| = " << bounds.value_bound << " and Lipschitz constant "
        << bounds.lipschitz << " exceed 0.25; rescale the features";
    throw std::invalid_argument(msg.str());
  }
  DrfProblem problem;
  problem.m = 3;
  problem.n = int(spec.features.rows());
  problem.d = int(spec.features.cols());
  problem.lipschitz = kFairnessBound;
  problem.bounds.assign(3, kFairnessBound);
  problem.domain = std::make_shared<EuclideanBall>(problem.d, owned->radius);
  problem.oracle = std::make_shared<FairnessOracle>(std::move(owned));
  return problem;
}

FairnessLrSpec GenerateFairnessLr(int n, int d, std::uint64_t seed, double cov_bound,
                                  double loss_rhs) {
  if (n < 2 || d < 2) throw std::invalid_argument("fairness generator: need n >= 2, d >= 2");
  Rng rng(seed);
  std::normal_distribution<double> normal;
  FairnessLrSpec spec;
  spec.cov_bound = cov_bound;
  spec.loss_rhs = loss_rhs;
  spec.features.resize(n, d);
  spec.labels.resize(n);
  spec.sensitive.resize(n);
  Vector truth(d);
  for (int j = 0; j < d; ++j) truth[j] = normal(rng) / std::sqrt(double(d));
  for (int r = 0; r < n; ++r) {
    spec.features(r, 0) = 1.0;  // intercept
    for (int j = 1; j < d; ++j) spec.features(r, j) = normal(rng);
    spec.sensitive[r] = spec.features(r, 1) + 0.5 * normal(rng) > 0 ? 1.0 : 0.0;
    const double u = spec.features.row(r).dot(truth) + 0.5 * spec.sensitive[r];
    spec.labels[r] = rng.Uniform() < Sigmoid(u) ? 1.0 : 0.0;
  }
  spec.radius = DefaultRadius(d);
  ScaleFeaturesForBounds(spec);
  return spec;
}

FairnessLrSpec MakeFairnessSpec(LoadedDataset data, double cov_bound, double loss_rhs) {
  FairnessLrSpec spec;
  spec.features = std::move(data.features);
  spec.labels = std::move(data.labels);
  spec.sensitive = std::move(data.sensitive);
  spec.cov_bound = cov_bound;
  spec.loss_rhs = loss_rhs;
  spec.radius = DefaultRadius(int(spec.features.cols()));
  ScaleFeaturesForBounds(spec);
  return spec;
}

// ---------------------------------------------------------------------------

ParamSelectSpec GenParamSelect(int J, int L, int m, int n, double sigma_sq, std::uint64_t seed,
                               double threshold_scale, double objective_scale) {
  if (J < 1 || L < 1 || m < 1 || n < 1) {
    throw std::invalid_argument("param-select: counts must be >= 1");
  }
  if (sigma_sq < 0) throw std::invalid_argument("param-select: sigma_sq must be >= 0");
  Rng rng(seed);
  std::uniform_real_distribution<double> mean_dist(0.0, 1.0 / J);
  std::normal_distribution<double> normal(0.0, std::sqrt(sigma_sq));
  const int d = J * L;
  const Vector x0 = Vector::Constant(d, 1.0 / L);
  ParamSelectSpec spec;
  spec.J = J;
  spec.L = L;
  spec.sigma_sq = sigma_sq;
  for (int i = 0; i < m; ++i) {
    Vector mu(d);
    for (int k = 0; k < d; ++k) mu[k] = mean_dist(rng);
    Matrix u(n, d);
    for (int r = 0; r < n; ++r) {
      for (int k = 0; k < d; ++k) u(r, k) = mu[k] + normal(rng);
    }
    const double at_uniform = (u * x0).mean();
    spec.thresholds.push_back((i == 0 ? objective_scale : threshold_scale) * at_uniform);
    spec.means.push_back(std::move(mu));
    spec.effects.push_back(std::move(u));
  }
  return spec;
}

DrfProblem BuildParamSelect(const ParamSelectSpec& spec) {
  const int m = int(spec.effects.size());
  if (m < 1 || int(spec.thresholds.size()) != m) {
    throw std::invalid_argument("param-select: need one threshold per metric");
  }
  auto domain = std::make_shared<ProductOfSimplices>(spec.J, spec.L);
  DrfProblem problem;
  problem.m = m;
  problem.n = int(spec.effects[0].rows());
  problem.d = spec.J * spec.L;
  std::vector<LinearOracle::Block> blocks;
  for (int i = 0; i < m; ++i) {
    const Matrix& u = spec.effects[i];
    if (u.cols() != problem.d) throw std::invalid_argument("param-select: effects width != J*L");
    double bound = 0.0;
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
      double lo = 0.0, hi = 0.0;
      for (int j = 0; j < spec.J; ++j) {
        const auto seg = u.row(r).segment(j * spec.L, spec.L);
        lo += seg.minCoeff();
        hi += seg.maxCoeff();
      }
      const double c = spec.thresholds[i];
      bound = std::max({bound, std::abs(lo - c), std::abs(hi - c)});
      problem.lipschitz = std::max(problem.lipschitz, domain->DualNorm(u.row(r).transpose()));
    }
    problem.bounds.push_back(bound);
    // Metric 0 must stay at or above its threshold.
    blocks.push_back({u, i == 0 ? -1.0 : 1.0, i == 0 ? spec.thresholds[i] : -spec.thresholds[i]});
  }
  problem.oracle = std::make_shared<LinearOracle>(std::move(blocks));
  problem.domain = std::move(domain);
  return problem;
}

// ---------------------------------------------------------------------------
// Newsvendor

namespace {

double LossAt(const NewsvendorSpec& s, const Vector& x, const Eigen::Ref<const Vector>& xi) {
  double loss = 0.0;
  for (int j = 0; j < s.d; ++j) {
    loss += (s.cost[j] - s.salvage[j]) * x[j] -
            (s.backorder[j] + s.retail[j] - s.salvage[j]) * std::min(x[j], xi[j]) +
            s.backorder[j] * xi[j];
  }
  return loss;
}

// g_x += scale * dL/dx; ties take the x side of min{x, xi}.
void AddLossSubgradient(const NewsvendorSpec& s, const Vector& x,
                        const Eigen::Ref<const Vector>& xi, double scale, Vector& g) {
  for (int j = 0; j < s.d; ++j) {
    double slope = s.cost[j] - s.salvage[j];
    if (x[j] <= xi[j]) slope -= s.backorder[j] + s.retail[j] - s.salvage[j];
    g[j] += scale * slope;
  }
}

class NewsvendorOracle final : public ConstraintOracle {
 public:
  NewsvendorOracle(std::shared_ptr<const NewsvendorSpec> spec, std::optional<double> threshold)
      : spec_(std::move(spec)), threshold_(threshold) {}

  double Value(int i, int r, const Vector& x) const override {
    const double loss = LossAt(*spec_, x, spec_->demand.row(r).transpose());
    if (IsObjective(i)) return loss - *threshold_;
    const double tau = x[spec_->d];
    return tau + std::max(loss - tau, 0.0) / spec_->cvar_level - spec_->cvar_bound;
  }

  void AddSubgradient(int i, int r, const Vector& x, double scale, Vector& g) const override {
    const auto xi = spec_->demand.row(r).transpose();
    if (IsObjective(i)) {
      AddLossSubgradient(*spec_, x, xi, scale, g);
      return;
    }
    const double tau = x[spec_->d];
    g[spec_->d] += scale;
    if (LossAt(*spec_, x, xi) > tau) {
      const double inv = 1.0 / spec_->cvar_level;
      AddLossSubgradient(*spec_, x, xi, scale * inv, g);
      g[spec_->d] -= scale * inv;
    }
  }

 private:
  bool IsObjective(int i) const { return threshold_.has_value() && i == 0; }

  std::shared_ptr<const NewsvendorSpec> spec_;
  std::optional<double> threshold_;
};

// Range of L(x, xi_r) over the box [0, cap]^d containing the budget set.
std::pair<double, double> LossRange(const NewsvendorSpec& s, int r) {
  double lo = 0.0, hi = 0.0;
  for (int j = 0; j < s.d; ++j) {
    const double xi = s.demand(r, j);
    const double a = s.cost[j] - s.salvage[j];
    const double k = s.backorder[j] + s.retail[j] - s.salvage[j];
    auto h = [&](double x) { return a * x - k * std::min(x, xi) + s.backorder[j] * xi; };
    double jlo = std::min(h(0.0), h(s.budget));
    double jhi = std::max(h(0.0), h(s.budget));
    if (xi > 0.0 && xi < s.budget) {
      jlo = std::min(jlo, h(xi));
      jhi = std::max(jhi, h(xi));
    }
    lo += jlo;
    hi += jhi;
  }
  return {lo, hi};
}

double CvarTerm(const NewsvendorSpec& s, double loss, double tau) {
  return tau + std::max(loss - tau, 0.0) / s.cvar_level - s.cvar_bound;
}

void CheckNewsvendor(const NewsvendorSpec& s) {
  if (s.d < 1) throw std::invalid_argument("newsvendor: d must be >= 1");
  for (const Vector* v : {&s.cost, &s.retail, &s.salvage, &s.backorder, &s.demand_mean}) {
    if (v->size() != s.d) throw std::invalid_argument("newsvendor: parameter length != d");
  }
  if (s.demand.cols() != s.d || s.demand.rows() < 2) {
    throw std::invalid_argument("newsvendor: demand must be n x d with n >= 2");
  }
  if ((s.cost.array() >= s.retail.array()).any() || (s.salvage.array() >= s.retail.array()).any()) {
    throw std::invalid_argument("newsvendor: need cost < retail and salvage < retail");
  }
  if (!(s.cvar_level > 0.0 && s.cvar_level <= 1.0)) {
    throw std::invalid_argument("newsvendor: cvar_level must lie in (0, 1]");
  }
  if (!(s.budget > 0.0)) throw std::invalid_argument("newsvendor: budget must be positive");
  if (!(s.tau.lo < s.tau.hi)) throw std::invalid_argument("newsvendor: empty tau interval");
}

}  // namespace

double NewsvendorLoss(const NewsvendorSpec& spec, const Vector& x, int r) {
  return LossAt(spec, x, spec.demand.row(r).transpose());
}

Eigen::MatrixXd DemandCorrelation(const Eigen::MatrixXd& factor) {
  const Eigen::MatrixXd U = factor.transpose() * factor;
  const Vector u = U.diagonal().cwiseSqrt().cwiseInverse();
  return u.asDiagonal() * U * u.asDiagonal();
}

NewsvendorSpec GenNewsvendor(int d, int n, std::uint64_t seed) {
  if (d < 1 || n < 2) throw std::invalid_argument("newsvendor generator: need d >= 1, n >= 2");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit;
  std::normal_distribution<double> normal;
  NewsvendorSpec s;
  s.d = d;
  s.retail = Vector::Constant(d, 0.5);
  s.salvage = 0.2 * s.retail;
  s.backorder = 0.25 * s.retail;
  s.cost.resize(d);
  s.demand_mean.resize(d);
  Vector sigma(d);
  for (int j = 0; j < d; ++j) s.cost[j] = 0.1 + 0.15 * unit(rng);
  for (int j = 0; j < d; ++j) s.demand_mean[j] = 0.1 + 0.1 * unit(rng);
  for (int j = 0; j < d; ++j) sigma[j] = s.demand_mean[j] * (0.05 + 0.15 * unit(rng));
  Eigen::MatrixXd S(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) S(a, b) = normal(rng);
  const Eigen::MatrixXd corr = DemandCorrelation(S);
  const Eigen::MatrixXd cov = sigma.asDiagonal() * corr * sigma.asDiagonal();
  // A tiny ridge keeps the factorization alive when S is near singular.
  Eigen::LLT<Eigen::MatrixXd> llt(cov + 1e-14 * Eigen::MatrixXd::Identity(d, d));
  const Eigen::MatrixXd chol = llt.matrixL();
  s.demand.resize(n, d);
  Vector z(d);
  for (int r = 0; r < n; ++r) {
    for (int j = 0; j < d; ++j) z[j] = normal(rng);
    s.demand.row(r) = (s.demand_mean + chol * z).transpose();
  }
  s.budget = 1.2 * s.demand_mean.sum();
  s.cvar_level = 0.1;

  std::vector<double> losses(n);
  for (int r = 0; r < n; ++r) losses[r] = NewsvendorLoss(s, s.demand_mean, r);
  std::vector<double> sorted = losses;
  std::sort(sorted.begin(), sorted.end());
  const int q = std::clamp(int(std::ceil((1.0 - s.cvar_level) * n)) - 1, 0, n - 1);
  const double tau = sorted[q];
  double cvar = 0.0;
  for (double loss : losses) cvar += tau + std::max(loss - tau, 0.0) / s.cvar_level;
  s.cvar_bound = cvar / n;
  const double margin = 0.1 * std::max(sorted.back() - sorted.front(), 1e-12);
  s.tau = {sorted.front() - margin, sorted.back() + margin};
  return s;
}

NewsvendorModel::NewsvendorModel(NewsvendorSpec spec) : spec_(std::move(spec)) {
  CheckNewsvendor(spec_);
  domain_ = std::make_shared<BudgetBox>(spec_.d, spec_.budget, spec_.tau);
}

Vector NewsvendorModel::InitialPoint() const {
  Vector x = Vector::Constant(spec_.d + 1, 0.15);
  x[spec_.d] = 0.5 * (spec_.tau.lo + spec_.tau.hi);
  return domain_->Project(x);
}

namespace {

double LossLipschitz(const NewsvendorSpec& s) {
  double sq = 0.0;
  for (int j = 0; j < s.d; ++j) {
    const double a = s.cost[j] - s.salvage[j];
    const double k = s.backorder[j] + s.retail[j] - s.salvage[j];
    sq += std::max(a * a, (a - k) * (a - k));
  }
  return std::sqrt(sq);
}

}  // namespace

DrfProblem NewsvendorModel::Objective(double threshold) const {
  DrfProblem problem = Constraint();
  const double cvar_bound = problem.bounds[0];
  double bound = 0.0;
  for (int r = 0; r < problem.n; ++r) {
    const auto [lo, hi] = LossRange(spec_, r);
    bound = std::max({bound, std::abs(lo - threshold), std::abs(hi - threshold)});
  }
  problem.m = 2;
  problem.bounds = {bound, cvar_bound};
  problem.oracle = std::make_shared<NewsvendorOracle>(
      std::make_shared<NewsvendorSpec>(spec_), threshold);
  return problem;
}

DrfProblem NewsvendorModel::Constraint() const {
  DrfProblem problem;
  problem.m = 1;
  problem.n = int(spec_.demand.rows());
  problem.d = spec_.d + 1;
  const double gl = LossLipschitz(spec_);
  const double inv = 1.0 / spec_.cvar_level;
  problem.lipschitz = std::max({gl, std::hypot(gl * inv, 1.0 - inv), 1.0});
  double bound = 0.0;
  for (int r = 0; r < problem.n; ++r) {
    const auto [lo, hi] = LossRange(spec_, r);
    // Convex in tau with its minimum at tau = loss, nondecreasing in loss.
    const double at_kink = std::clamp(lo, spec_.tau.lo, spec_.tau.hi);
    for (double v : {CvarTerm(spec_, lo, spec_.tau.lo), CvarTerm(spec_, lo, spec_.tau.hi),
                     CvarTerm(spec_, lo, at_kink), CvarTerm(spec_, hi, spec_.tau.lo),
                     CvarTerm(spec_, hi, spec_.tau.hi)}) {
      bound = std::max(bound, std::abs(v));
    }
  }
  problem.bounds = {bound};
  problem.domain = domain_;
  problem.oracle = std::make_shared<NewsvendorOracle>(std::make_shared<NewsvendorSpec>(spec_),
                                                      std::nullopt);
  problem.x_init = InitialPoint();
  return problem;
}

ProblemFamily NewsvendorModel::Family() const {
  return [model = *this](double threshold) { return model.Objective(threshold); };
}

}  // namespace drf
