#include "drf/ambiguity.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace drf {
namespace {

// Re-materialize once the lazy scale has shrunk this far. The averaging sums
// subtract snapshots of a running total, so letting the scale decay much
// further trades away digits of the average.
constexpr double kRebuildScale = 1e-3;

// Quantities shared by the projection and the linear sup, all in the form
// h = ||p - 1/n||^2 / 2 compared against rho / n^2.
struct Geometry {
  double uniform;      // 1/n
  double floor;        // delta/n
  double floored_sq;   // h contribution of a coordinate sitting at the floor
  double target;       // rho/n^2

  explicit Geometry(const Chi2Set& set)
      : uniform(1.0 / set.n()),
        floor(set.floor()),
        floored_sq(0.5 * std::pow((1.0 - set.delta()) / set.n(), 2)),
        target(set.rho() / (static_cast<double>(set.n()) * set.n())) {}
};

void CheckFinite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite input");
}

}  // namespace

Chi2Set::Chi2Set(int n, double rho, double delta) : n_(n), rho_(rho), delta_(delta) {
  if (n < 2) throw std::invalid_argument("ambiguity set: n must be >= 2");
  if (!(rho > 0.0) || rho > 0.5 * n) {
    std::ostringstream msg;
    msg << "ambiguity set: rho must lie in (0, n/2] = (0, " << 0.5 * n << "], got " << rho;
    throw std::invalid_argument(msg.str());
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("ambiguity set: delta must lie in (0, 1)");
  }
}

double Chi2Set::SumBound() const { return 1.0 + std::sqrt(2.0 * rho_ / n_); }

double Chi2Set::Diameter() const {
  return 4.0 * rho_ / (static_cast<double>(n_) * n_);
}

double Chi2Set::Divergence(const Vector& p) const {
  return (n_ * p.array() - 1.0).square().sum() / (2.0 * n_);
}

bool Contains(const Chi2Set& set, const Vector& p, double tol) {
  if (p.size() != set.n() || !p.allFinite()) return false;
  if (p.minCoeff() < set.floor() - tol) return false;
  return set.Divergence(p) <= set.rho() / set.n() + tol;
}

Vector PrimalFromAlpha(const Chi2Set& set, const Vector& w, double alpha) {
  const Geometry geo(set);
  return ((1.0 - alpha) * w.array() + alpha * geo.uniform).max(geo.floor).matrix();
}

double ScaledDualSlope(const Chi2Set& set, const Vector& w, double alpha) {
  const Geometry geo(set);
  const Vector p = PrimalFromAlpha(set, w, alpha);
  const double h = 0.5 * (p.array() - geo.uniform).square().sum();
  const double n = set.n();
  return n * n * h - set.rho();
}

Vector Project(const Chi2Set& set, const Vector& w) {
  if (w.size() != set.n()) throw std::invalid_argument("project: length differs from n");
  CheckFinite(w, "project");
  const Geometry geo(set);
  const int n = set.n();

  // Coordinates at or above the floor stay active for every alpha. The others
  // become active once alpha passes their breakpoint.
  double active_sq = 0.0;
  std::vector<std::pair<double, double>> low;  // (breakpoint, half squared deviation)
  for (int r = 0; r < n; ++r) {
    const double half_sq = 0.5 * (w[r] - geo.uniform) * (w[r] - geo.uniform);
    if (w[r] >= geo.floor) {
      active_sq += half_sq;
    } else {
      low.emplace_back((geo.floor - w[r]) / (geo.uniform - w[r]), half_sq);
    }
  }
  const int k = static_cast<int>(low.size());
  if (active_sq + k * geo.floored_sq <= geo.target) return PrimalFromAlpha(set, w, 0.0);

  std::sort(low.begin(), low.end());
  std::vector<double> active(k + 1);  // active[j]: sum over the first j breakpoints
  active[0] = active_sq;
  for (int j = 0; j < k; ++j) active[j + 1] = active[j] + low[j].second;
  auto breakpoint = [&](int j) { return j == 0 ? 0.0 : low[j - 1].first; };
  // h at the left end of segment j; non-increasing in j.
  auto h_start = [&](int j) {
    const double keep = 1.0 - breakpoint(j);
    return keep * keep * active[j] + (k - j) * geo.floored_sq;
  };
  // Largest segment whose left end still violates the divergence bound.
  int lo = 0;
  int hi = k;
  while (lo < hi) {
    const int mid = (lo + hi + 1) / 2;
    if (h_start(mid) > geo.target) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  const int j = lo;
  const double left = breakpoint(j);
  const double right = j < k ? low[j].first : 1.0;
  const double rhs = geo.target - (k - j) * geo.floored_sq;
  double alpha = right;
  if (active[j] > 0.0 && rhs > 0.0) alpha = 1.0 - std::sqrt(rhs / active[j]);
  alpha = std::clamp(alpha, left, right);
  return PrimalFromAlpha(set, w, alpha);
}

OneSparseProjection ProjectOneSparse(const Chi2Set& set, double sum1, double sum2,
                                     double old_value, double new_value) {
  if (!std::isfinite(new_value)) throw std::invalid_argument("project: non-finite input");
  const Geometry geo(set);
  const double n = set.n();
  const double rest1 = sum1 - old_value;
  const double rest2 = sum2 - old_value * old_value;
  const double rest_sq = std::max(0.0, 0.5 * rest2 - rest1 / n + (n - 1.0) / (2.0 * n * n));
  const double touched_sq = 0.5 * (new_value - geo.uniform) * (new_value - geo.uniform);
  const double full_sq = rest_sq + touched_sq;

  double alpha = 0.0;
  if (new_value >= geo.floor) {
    // The touched coordinate stays active for every alpha: I(alpha) = [n].
    if (full_sq > geo.target) alpha = 1.0 - std::sqrt(geo.target / full_sq);
  } else if (rest_sq + geo.floored_sq > geo.target) {
    // The touched coordinate is floored for alpha below the breakpoint, where
    // I(alpha) = [n] minus the touched index.
    const double breakpoint = (geo.floor - new_value) / (geo.uniform - new_value);
    const double keep = 1.0 - breakpoint;
    if (keep * keep * rest_sq + geo.floored_sq <= geo.target) {
      alpha = 1.0 - std::sqrt((geo.target - geo.floored_sq) / rest_sq);
      alpha = std::clamp(alpha, 0.0, breakpoint);
    } else {
      alpha = 1.0 - std::sqrt(geo.target / full_sq);
      alpha = std::clamp(alpha, breakpoint, 1.0);
    }
  }
  OneSparseProjection out;
  out.alpha = alpha;
  out.touched_value = std::max(geo.floor, (1.0 - alpha) * new_value + alpha * geo.uniform);
  return out;
}

SupLinearResult SupLinear(const Chi2Set& set, const Vector& f) {
  if (f.size() != set.n()) throw std::invalid_argument("sup_linear: length differs from n");
  CheckFinite(f, "sup_linear");
  const Geometry geo(set);
  const int n = set.n();
  SupLinearResult out;

  if (f.maxCoeff() == f.minCoeff()) {
    // Constant objective: c * sum(p). Shift uniformly to the divergence
    // boundary, upward when c > 0 and downward (down to the floor) when c < 0.
    const double c = f[0];
    const double shift = std::sqrt(2.0 * geo.target / n);
    if (c > 0.0) {
      out.argmax = Vector::Constant(n, geo.uniform + shift);
      out.lambda = c / shift;
    } else if (c < 0.0) {
      out.argmax = Vector::Constant(n, std::max(geo.floor, geo.uniform - shift));
      out.lambda = -c / shift;
    } else {
      out.argmax = set.Uniform();
      out.lambda = std::numeric_limits<double>::infinity();
    }
    out.value = c * out.argmax.sum();
    return out;
  }

  // p(mu) = max(delta/n, 1/n + mu f) with mu = 1/lambda. Negative entries hit
  // the floor at mu_r = (1 - delta) / (n |f_r|), largest |f_r| first.
  double positive_sq = 0.0;
  std::vector<std::pair<double, double>> negative;  // (mu_r, f_r^2 / 2)
  for (int r = 0; r < n; ++r) {
    const double half_sq = 0.5 * f[r] * f[r];
    if (f[r] < 0.0) {
      negative.emplace_back((1.0 - set.delta()) / (n * -f[r]), half_sq);
    } else {
      positive_sq += half_sq;
    }
  }
  std::sort(negative.begin(), negative.end());
  const int k = static_cast<int>(negative.size());
  std::vector<double> free_sq(k + 1);  // free_sq[j]: entries not yet floored after j
  free_sq[k] = positive_sq;
  for (int j = k - 1; j >= 0; --j) free_sq[j] = free_sq[j + 1] + negative[j].second;
  auto breakpoint = [&](int j) { return j == 0 ? 0.0 : negative[j - 1].first; };
  auto h_start = [&](int j) {
    const double mu = breakpoint(j);
    return mu * mu * free_sq[j] + j * geo.floored_sq;
  };
  // Largest segment whose left end is still inside the set; h is non-decreasing.
  int lo = 0;
  int hi = k;
  while (lo < hi) {
    const int mid = (lo + hi + 1) / 2;
    if (h_start(mid) <= geo.target) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  const int j = lo;
  if (free_sq[j] <= 0.0) {
    // Every remaining entry is zero: the bound never binds (mu -> infinity).
    out.argmax = (f.array() < 0.0).select(Vector::Constant(n, geo.floor), geo.uniform);
    out.lambda = 0.0;
  } else {
    const double left = breakpoint(j);
    const double right = j < k ? negative[j].first : std::numeric_limits<double>::infinity();
    const double mu =
        std::clamp(std::sqrt((geo.target - j * geo.floored_sq) / free_sq[j]), left, right);
    out.argmax = (geo.uniform + mu * f.array()).max(geo.floor).matrix();
    out.lambda = 1.0 / mu;
  }
  out.value = out.argmax.dot(f);
  return out;
}

// ---------------------------------------------------------------------------
// DistState

DistState::DistState(const Chi2Set& set, SamplerMode mode)
    : DistState(set, set.Uniform(), mode) {}

DistState::DistState(const Chi2Set& set, const Vector& p, SamplerMode mode)
    : set_(set), mode_(mode) {
  if (p.size() != set.n()) throw std::invalid_argument("distribution: length differs from n");
  CheckFinite(p, "distribution");
  stored_.assign(p.data(), p.data() + p.size());
  top_bit_ = 1;
  while (top_bit_ * 2 <= set.n()) top_bit_ *= 2;
  Rebuild();
}

Vector DistState::Materialize() const {
  Vector p(size());
  for (int r = 0; r < size(); ++r) p[r] = value(r);
  return p;
}

void DistState::FenwickAdd(int r, double delta) {
  for (int k = r + 1; k <= size(); k += k & -k) tree_[k] += delta;
}

double DistState::FenwickPrefix(int k) const {
  double total = 0.0;
  for (; k > 0; k -= k & -k) total += tree_[k];
  return total;
}

double DistState::PrefixSum(int k) const {
  if (k <= 0) return 0.0;
  if (mode_ == SamplerMode::kCumulative) return cumulative_[k - 1];
  return scale_ * FenwickPrefix(k) + shift_ * k;
}

int DistState::Sample(double u) const {
  if (!(sum1_ > 0.0)) throw std::runtime_error("distribution: total mass is not positive");
  const double target = u * sum1_;
  const int n = size();
  if (mode_ == SamplerMode::kCumulative) {
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
    return std::min(static_cast<int>(it - cumulative_.begin()), n - 1);
  }
  // Fenwick descent; a node covering `step` entries holds their stored sum,
  // which maps to scale * node + shift * step in actual mass.
  int pos = 0;
  double remaining = target;
  for (int step = top_bit_; step > 0; step >>= 1) {
    const int next = pos + step;
    if (next > n) continue;
    const double block = scale_ * tree_[next] + shift_ * step;
    if (block <= remaining) {
      pos = next;
      remaining -= block;
    }
  }
  return std::min(pos, n - 1);
}

void DistState::SampleMany(Rng& rng, std::span<int> out) const {
  if (!(sum1_ > 0.0)) throw std::runtime_error("distribution: total mass is not positive");
  if (mode_ == SamplerMode::kCumulative) {
    for (int& r : out) r = Sample(rng);
    return;
  }
  const int n = size();
  std::vector<double> remaining(out.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    remaining[k] = rng.Uniform() * sum1_;
    out[k] = 0;
  }
  for (int step = top_bit_; step > 0; step >>= 1) {
    const double shift = shift_ * step;
    // Branch-free: the comparisons are coin flips to the predictor.
    for (std::size_t k = 0; k < out.size(); ++k) {
      const int next = out[k] + step;
      const bool inside = next <= n;
      const double block = scale_ * tree_[inside ? next : 0] + shift;
      const bool take = inside && block <= remaining[k];
      out[k] = take ? next : out[k];
      remaining[k] -= take ? block : 0.0;
    }
  }
  for (int& r : out) r = std::min(r, n - 1);
}

void DistState::Flush(int r) {
  if (partial_.empty()) return;
  partial_[r] += stored_[r] * (scale_sum_ - snapshot_[r]);
  snapshot_[r] = scale_sum_;
}

void DistState::AffineUpdate(double alpha, int touched, double touched_value) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("distribution update: alpha must lie in [0, 1)");
  }
  if (touched < 0 || touched >= size()) {
    throw std::out_of_range("distribution update: touched index out of range");
  }
  if (!std::isfinite(touched_value)) {
    throw std::invalid_argument("distribution update: non-finite touched value");
  }
  const double n = size();
  const double keep = 1.0 - alpha;
  const double mapped = keep * value(touched) + alpha / n;

  // Cache recurrences for sum(p) and sum(p^2) under p -> keep p + alpha/n,
  // followed by the touched-coordinate correction.
  const double old_sum1 = sum1_;
  sum1_ = keep * old_sum1 + alpha;
  sum2_ = keep * keep * sum2_ + 2.0 * alpha * keep * old_sum1 / n + alpha * alpha / n;
  sum1_ += touched_value - mapped;
  sum2_ += touched_value * touched_value - mapped * mapped;

  Flush(touched);
  scale_ *= keep;
  shift_ = keep * shift_ + alpha / n;
  const double stored = (touched_value - shift_) / scale_;
  const double delta = stored - stored_[touched];
  stored_[touched] = stored;

  if (mode_ == SamplerMode::kFenwick) {
    FenwickAdd(touched, delta);
  } else {
    const double correction = touched_value - mapped;
    for (int k = 0; k < size(); ++k) {
      cumulative_[k] = keep * cumulative_[k] + alpha * (k + 1) / n;
      if (k >= touched) cumulative_[k] += correction;
    }
  }
  if (scale_ < kRebuildScale) Rebuild();
}

void DistState::Rebuild() {
  const int n = size();
  for (int r = 0; r < n; ++r) Flush(r);
  for (int r = 0; r < n; ++r) stored_[r] = value(r);
  if (!partial_.empty()) {
    scale_sum_ = 0.0;
    std::fill(snapshot_.begin(), snapshot_.end(), 0.0);
  }
  scale_ = 1.0;
  shift_ = 0.0;
  sum1_ = 0.0;
  sum2_ = 0.0;
  for (double v : stored_) {
    sum1_ += v;
    sum2_ += v * v;
  }
  if (mode_ == SamplerMode::kFenwick) {
    tree_.assign(n + 1, 0.0);
    for (int k = 1; k <= n; ++k) {
      tree_[k] += stored_[k - 1];
      const int parent = k + (k & -k);
      if (parent <= n) tree_[parent] += tree_[k];
    }
  } else {
    cumulative_.resize(n);
    double running = 0.0;
    for (int k = 0; k < n; ++k) cumulative_[k] = (running += stored_[k]);
  }
}

DistState::AuditResult DistState::Audit() const {
  AuditResult out;
  long double s1 = 0.0L;
  long double s2 = 0.0L;
  for (int r = 0; r < size(); ++r) {
    const long double v = value(r);
    s1 += v;
    s2 += v * v;
    out.prefix_err =
        std::max(out.prefix_err, std::abs(static_cast<double>(s1) - PrefixSum(r + 1)));
  }
  out.sum1_err = std::abs(static_cast<double>(s1) - sum1_);
  out.sum2_err = std::abs(static_cast<double>(s2) - sum2_);
  return out;
}

void DistState::Accumulate(double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta)) {
    throw std::invalid_argument("distribution average: weight must be positive");
  }
  if (partial_.empty()) {
    partial_.assign(size(), 0.0);
    snapshot_.assign(size(), scale_sum_);
  }
  weight_ += theta;
  scale_sum_ += theta * scale_;
  shift_sum_ += theta * shift_;
}

Vector DistState::Average() const {
  if (weight_ <= 0.0) throw std::logic_error("distribution average: nothing accumulated");
  Vector avg(size());
  for (int r = 0; r < size(); ++r) {
    avg[r] = (partial_[r] + stored_[r] * (scale_sum_ - snapshot_[r]) + shift_sum_) / weight_;
  }
  return avg;
}

}  // namespace drf
