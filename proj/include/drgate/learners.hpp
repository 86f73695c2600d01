#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "drgate/data.hpp"

/// First-stage supervised learners: penalized linear regression, logistic
/// regression, regression forests, and an out-of-fold stacking ensemble.
namespace drgate::learn {

/// Per-feature centering and scaling (population SD). Constant columns keep
/// scale 1 and are flagged so solvers leave their coefficient at zero.
struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  std::vector<bool> constant;

  static Standardization fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

class Model {
 public:
  virtual ~Model() = default;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& x) const = 0;
};
using ModelPtr = std::shared_ptr<const Model>;

/// Penalty on standardized coefficients. `alpha` mixes L1 (1) and L2 (0).
struct Penalty {
  double lambda = 0.0;
  double alpha = 0.0;
};

/// Affine predictor intercept + standardized(x) . coefficients.
class LinearModel final : public Model {
 public:
  LinearModel(double intercept, Eigen::VectorXd coefficients, Standardization standardization, Penalty penalty)
      : intercept_(intercept), coefficients_(std::move(coefficients)), std_(std::move(standardization)), penalty_(penalty) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;

  double intercept() const noexcept { return intercept_; }
  const Eigen::VectorXd& coefficients() const noexcept { return coefficients_; }
  const Standardization& standardization() const noexcept { return std_; }
  const Penalty& penalty() const noexcept { return penalty_; }

  /// Coefficients and intercept on the original feature scale.
  Eigen::VectorXd raw_coefficients() const;
  double raw_intercept() const;

 private:
  double intercept_;
  Eigen::VectorXd coefficients_;
  Standardization std_;
  Penalty penalty_;
};

class LogitModel final : public Model {
 public:
  LogitModel(double intercept, Eigen::VectorXd coefficients, Standardization standardization, Penalty penalty = {})
      : intercept_(intercept), coefficients_(std::move(coefficients)), std_(std::move(standardization)), penalty_(penalty) {}

  /// Probabilities, strictly inside (0,1).
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;
  Eigen::VectorXd linear_predictor(const Eigen::MatrixXd& x) const;

  double intercept() const noexcept { return intercept_; }
  const Eigen::VectorXd& coefficients() const noexcept { return coefficients_; }
  Eigen::VectorXd raw_coefficients() const;
  double raw_intercept() const;

 private:
  double intercept_;
  Eigen::VectorXd coefficients_;
  Standardization std_;
  Penalty penalty_;
};

class ConstantModel final : public Model {
 public:
  explicit ConstantModel(double value) : value_(value) {}
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    return Eigen::VectorXd::Constant(x.rows(), value_);
  }
  double value() const noexcept { return value_; }

 private:
  double value_;
};

// ---------------------------------------------------------------------------
// Linear and logistic solvers

struct CdOptions {
  double tol = 1e-7;
  int max_sweeps = 10000;
};

struct IrlsOptions {
  double tol = 1e-8;
  int max_iter = 100;
};

/// Minimizes sum (t - yhat)^2 + lambda ||beta||^2 over standardized features
/// with an unpenalized intercept, by a direct linear solve.
LinearModel fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, double lambda);
inline LinearModel fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& t) { return fit_ridge(x, t, 0.0); }

/// Cyclic coordinate descent with soft-thresholding for
///   (1/2N) sum (t - yhat)^2 + lambda (alpha ||beta||_1 + (1-alpha)/2 ||beta||^2)
/// on standardized features. Note the scale: the ridge objective above equals
/// 2N times this one at alpha = 0, so fit_ridge(lambda) == fit_elastic_net(lambda / N, 0).
LinearModel fit_elastic_net(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, double lambda, double alpha,
                            const CdOptions& opts = {});

/// Largest absolute KKT violation of an elastic-net solution (standardized scale).
double elastic_net_kkt_residual(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, const LinearModel& model);

/// Unpenalized maximum likelihood via iteratively reweighted least squares.
LogitModel fit_logit(const Eigen::MatrixXd& x, const Eigen::VectorXd& labels, const IrlsOptions& opts = {});

/// Penalized logistic regression: IRLS outer loop, weighted coordinate descent
/// on the working response inside, same penalty scale as fit_elastic_net
/// with the mean negative log-likelihood as the loss.
LogitModel fit_penalized_logit(const Eigen::MatrixXd& x, const Eigen::VectorXd& labels, double lambda, double alpha,
                               const IrlsOptions& irls = {}, const CdOptions& cd = {});

/// Gradient of the mean log-likelihood with respect to (intercept, standardized coefficients).
Eigen::VectorXd logit_score(const Eigen::MatrixXd& x, const Eigen::VectorXd& labels, const LogitModel& model);

// ---------------------------------------------------------------------------
// Forests

struct ForestParams {
  int n_trees = 500;
  int mtry = 0;       ///< 0: ceil(sqrt(feature count))
  int min_leaf = 5;
  int max_depth = 0;  ///< 0: unlimited
  bool bootstrap = true;
  std::uint64_t seed = 1;
};

struct TreeNode {
  int feature = -1;  ///< -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  int count = 0;  ///< training rows (with bootstrap multiplicity) reaching the node
};

class RegressionTree {
 public:
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}
  double predict_row(const Eigen::MatrixXd& x, Eigen::Index row) const;
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

 private:
  std::vector<TreeNode> nodes_;
};

class ForestModel final : public Model {
 public:
  ForestModel(std::vector<RegressionTree> trees, ForestParams params, Eigen::VectorXd oob)
      : trees_(std::move(trees)), params_(params), oob_(std::move(oob)) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;
  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
  const ForestParams& params() const noexcept { return params_; }
  /// Out-of-bag predictions for the training rows (NaN where a row was in every bag).
  const Eigen::VectorXd& oob_predictions() const noexcept { return oob_; }

 private:
  std::vector<RegressionTree> trees_;
  ForestParams params_;
  Eigen::VectorXd oob_;
};

/// Bootstrap CART regression trees with variance-reduction splits over mtry
/// random candidate features per node. Deterministic given params.seed.
ForestModel fit_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, const ForestParams& params);

// ---------------------------------------------------------------------------
// Learner abstraction, penalty selection and stacking

enum class LearnerKind {
  Mean,
  Ols,
  Ridge,
  Lasso,
  ElasticNet,
  Forest,
  Logit,
  LogitRidge,
  LogitLasso,
  LogitElasticNet,
  ProbabilityForest,
};

const char* to_string(LearnerKind kind) noexcept;
LearnerKind learner_kind_from_string(const std::string& s);
bool is_penalized(LearnerKind kind) noexcept;
bool is_logistic(LearnerKind kind) noexcept;

struct LearnerSpec {
  LearnerKind kind = LearnerKind::Lasso;
  double alpha = 0.5;            ///< elastic-net mixing (ElasticNet / LogitElasticNet)
  int grid_size = 50;
  double grid_ratio = 1e-3;      ///< smallest lambda = ratio * lambda_max
  std::vector<double> lambda_grid;  ///< overrides the automatic grid when non-empty
  ForestParams forest;           ///< used by forest kinds; seed is replaced per fit
  bool base_features_only = false;  ///< use only the pre-expansion X columns

  static LearnerSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  double mixing() const noexcept;
  std::string name() const;
};

struct CrossFitted {
  Eigen::VectorXd oof;  ///< out-of-fold predictions for every training row
  ModelPtr full;        ///< model refit on all rows
};

class Learner {
 public:
  virtual ~Learner() = default;
  virtual std::string name() const = 0;
  virtual ModelPtr fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, std::uint64_t seed) const = 0;
  /// Out-of-fold predictions over `folds` plus a full-sample refit. The default
  /// refits on every fold complement; learners override it when they can
  /// produce honest out-of-sample predictions more cheaply.
  virtual CrossFitted cross_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, const FoldPlan& folds,
                                std::uint64_t seed) const;
};
using LearnerPtr = std::shared_ptr<const Learner>;

/// `base_columns` > 0 together with spec.base_features_only restricts the
/// learner to the leading pre-expansion columns.
LearnerPtr make_learner(const LearnerSpec& spec, std::size_t base_columns = 0);

/// Null-model threshold: the smallest lambda at which every L1-penalized
/// coefficient is zero, divided by max(alpha, 1e-3) so ridge gets a usable scale.
double lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, double alpha);
std::vector<double> default_lambda_grid(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, double alpha,
                                        int points = 50, double ratio = 1e-3);

struct PenaltyChoice {
  Penalty penalty;
  std::size_t index = 0;
  std::vector<double> grid;      ///< sorted descending
  std::vector<double> cv_mse;    ///< per grid point
  Eigen::VectorXd oof_at_choice; ///< out-of-fold predictions at the chosen lambda
};

/// K-fold cross-validated lambda for a penalized kind. Lambdas are on the
/// elastic-net scale. Ties go to the larger lambda.
PenaltyChoice select_penalty(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, LearnerKind kind,
                             std::vector<double> grid, int k, std::uint64_t seed, double alpha = 0.5);
/// Same, with caller-supplied folds.
PenaltyChoice select_penalty(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, LearnerKind kind,
                             std::vector<double> grid, const FoldPlan& folds, double alpha = 0.5);

class EnsembleModel final : public Model {
 public:
  EnsembleModel(std::vector<ModelPtr> members, std::vector<std::string> names, Eigen::VectorXd weights,
                Eigen::VectorXd member_oof_mse, double oof_mse)
      : members_(std::move(members)),
        names_(std::move(names)),
        weights_(std::move(weights)),
        member_oof_mse_(std::move(member_oof_mse)),
        oof_mse_(oof_mse) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;

  const std::vector<ModelPtr>& members() const noexcept { return members_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const Eigen::VectorXd& weights() const noexcept { return weights_; }
  const Eigen::VectorXd& member_oof_mse() const noexcept { return member_oof_mse_; }
  double oof_mse() const noexcept { return oof_mse_; }

 private:
  std::vector<ModelPtr> members_;
  std::vector<std::string> names_;
  Eigen::VectorXd weights_;
  Eigen::VectorXd member_oof_mse_;
  double oof_mse_;
};

/// Weights on the probability simplex minimizing ||t - P w||^2 exactly.
Eigen::VectorXd simplex_least_squares(const Eigen::MatrixXd& p, const Eigen::VectorXd& t);

EnsembleModel fit_ensemble(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, const std::vector<LearnerPtr>& members,
                           int k, std::uint64_t seed);
EnsembleModel fit_ensemble(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, const std::vector<LearnerSpec>& members,
                           int k, std::uint64_t seed);

}  // namespace drgate::learn
