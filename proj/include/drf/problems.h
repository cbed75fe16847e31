#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "drf/core.h"
#include "drf/meta.h"

namespace drf {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// F^i_r(x) = sign_i * (U_i x)_r + offset_i.
class LinearOracle final : public ConstraintOracle {
 public:
  struct Block {
    Matrix effects;  // n x d
    double sign = 1.0;
    double offset = 0.0;
  };

  explicit LinearOracle(std::vector<Block> blocks);

  double Value(int i, int r, const Vector& x) const override;
  void AddSubgradient(int i, int r, const Vector& x, double scale, Vector& g) const override;
  void Values(int i, const Vector& x, Vector& out) const override;
  double SumValues(int i, std::span<const int> rows, const Vector& x) const override;
  void AddWeightedSubgradient(int i, const Vector& x, const Vector& weights,
                              Vector& g) const override;
  std::unique_ptr<WeightedConstraint> Weighted(int i, const Vector& weights) const override;

  const Block& block(int i) const { return blocks_[i]; }

 private:
  std::vector<Block> blocks_;
};

// ---------------------------------------------------------------------------
// Toy instances

// F^i_r(x) = value for every i, r, x on the unit ball of dimension d.
DrfProblem MakeConstantToy(int m, int n, int d, double value);

// m = 1, F_r(x) = a_r'x + offset with ||a_r|| <= 1, on the unit ball.
DrfProblem MakeLinearBallToy(int n, int d, double offset, std::uint64_t seed);

// F^0 - threshold, other constraints unchanged: minimizes the worst-case
// expectation of constraint 0 subject to the rest.
ProblemFamily ShiftedFamily(DrfProblem base);

// ---------------------------------------------------------------------------
// Fair logistic regression

struct FairnessLrSpec {
  Matrix features;   // n x d
  Vector labels;     // 0/1
  Vector sensitive;  // z_r
  double cov_bound = 0.05;
  double loss_rhs = 0.5;
  double radius = 0.0;  // 5 ln d unless set
};

inline constexpr double kFairnessBound = 0.25;

struct FairnessBounds {
  double value_bound = 0.0;      // max over constraints of sup |F|
  double lipschitz = 0.0;
};

// Exact worst-case |F| and Lipschitz constant over the radius ball.
FairnessBounds ComputeFairnessBounds(const FairnessLrSpec& spec);

// Multiplies the features by the largest factor <= 1 under which every
// |F| and the Lipschitz constant stay within 0.25.
void ScaleFeaturesForBounds(FairnessLrSpec& spec);

// Throws if the 0.25 bounds do not hold on the data.
DrfProblem BuildFairnessLr(const FairnessLrSpec& spec);

// Synthetic data: Gaussian features, a sensitive attribute correlated with
// the first feature, labels from a logistic model. Features come back scaled.
FairnessLrSpec GenerateFairnessLr(int n, int d, std::uint64_t seed, double cov_bound = 0.05,
                                  double loss_rhs = 0.5);

struct CsvSchema {
  std::string label;
  std::string sensitive;
  std::vector<std::string> continuous;
  std::vector<std::string> categorical;
  int degree = 1;
  // When set, labels (resp. sensitive values) equal to this string map to 1
  // and everything else to 0; otherwise the column must be numeric.
  std::string label_positive;
  std::string sensitive_positive;
};

CsvSchema ParseCsvSchema(const std::string& json_text);
CsvSchema LoadCsvSchema(const std::string& path);

struct LoadedDataset {
  Matrix features;
  Vector labels;
  Vector sensitive;
  std::vector<std::string> feature_names;
};

// Continuous columns are min-max scaled to [0, 1] and expanded with every
// monomial of total degree 2..schema.degree; categorical columns are one-hot
// encoded in sorted level order.
LoadedDataset LoadCsvDataset(const std::string& path, const CsvSchema& schema);

// Exponent multisets of total degree 2..degree over `vars` variables, by
// degree and then lexicographically; each entry lists variable indices.
std::vector<std::vector<int>> Monomials(int vars, int degree);

FairnessLrSpec MakeFairnessSpec(LoadedDataset data, double cov_bound = 0.05,
                                double loss_rhs = 0.5);

// ---------------------------------------------------------------------------
// Parameter selection over J cohorts x L levels

struct ParamSelectSpec {
  int J = 0;
  int L = 0;
  double sigma_sq = 0.0;
  // effects[i] is n x (J L); effects[0] is the metric that must stay large.
  std::vector<Matrix> effects;
  std::vector<Vector> means;
  std::vector<double> thresholds;
};

// u^i_r ~ N(mu^i, sigma^2 I) with mu^i entries uniform on (0, 1/J). Metric 0
// must satisfy mean >= objective_scale * (its value at the uniform allocation);
// the others <= threshold_scale * theirs.
ParamSelectSpec GenParamSelect(int J, int L, int m, int n, double sigma_sq,
                               std::uint64_t seed, double threshold_scale = 1.1,
                               double objective_scale = 0.9);

DrfProblem BuildParamSelect(const ParamSelectSpec& spec);

// ---------------------------------------------------------------------------
// Newsvendor with a CVaR constraint

struct NewsvendorSpec {
  int d = 0;
  Vector cost, retail, salvage, backorder;
  Vector demand_mean;
  Matrix demand;  // n x d samples
  double budget = 0.0;
  double cvar_level = 0.1;  // beta
  double cvar_bound = 0.0;
  Interval tau;
};

// diag(u) S'S diag(u) with u = 1 / sqrt(diag(S'S)).
Eigen::MatrixXd DemandCorrelation(const Eigen::MatrixXd& factor);

NewsvendorSpec GenNewsvendor(int d, int n, std::uint64_t seed);

// L(x, xi) = (c - s)'x - (b + r - s)'min(x, xi) + b'xi.
double NewsvendorLoss(const NewsvendorSpec& spec, const Vector& x, int r);

// Decision vector is (order quantities x, tau).
class NewsvendorModel {
 public:
  explicit NewsvendorModel(NewsvendorSpec spec);

  const NewsvendorSpec& spec() const { return spec_; }

  // m = 2: loss - threshold and the CVaR constraint.
  DrfProblem Objective(double threshold) const;
  // m = 1: the CVaR constraint alone.
  DrfProblem Constraint() const;
  ProblemFamily Family() const;

  // x = 0.15 for every item and tau at the middle of its interval.
  Vector InitialPoint() const;

 private:
  NewsvendorSpec spec_;
  std::shared_ptr<const BudgetBox> domain_;
};

// ---------------------------------------------------------------------------
// Dataset files

void WriteMatrixCsv(const std::string& path, const Matrix& data,
                    const std::vector<std::string>& header);
Matrix ReadMatrixCsv(const std::string& path, std::vector<std::string>* header = nullptr);

// Spec documents pair a JSON file (everything but the samples) with CSV files.
void SaveNewsvendor(const NewsvendorSpec& spec, const std::string& prefix);
NewsvendorSpec LoadNewsvendor(const std::string& spec_path);
void SaveParamSelect(const ParamSelectSpec& spec, const std::string& prefix);
ParamSelectSpec LoadParamSelect(const std::string& spec_path);
// Writes prefix.csv and prefix.schema.json in the CSV loader's layout.
void SaveFairnessCsv(const FairnessLrSpec& spec, const std::string& prefix);

}  // namespace drf
