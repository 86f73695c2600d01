#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "drgate/data.hpp"
#include "drgate/learners.hpp"

namespace drgate {

enum class NuisanceRole { Propensity, Outcome0, Outcome1 };
const char* to_string(NuisanceRole role) noexcept;

/// Learner block of a run: one ensemble for p(x), one shared by m0 and m1.
struct LearnerConfig {
  std::vector<learn::LearnerSpec> propensity;
  std::vector<learn::LearnerSpec> outcome;
  int cv_folds = 5;

  /// Lasso, Ridge, Elastic Net and a forest for both roles.
  static LearnerConfig ensemble_default();
  /// Logit for p and OLS for m_d.
  static LearnerConfig parametric();
  static LearnerConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Which training rows produced the model that predicted a fold.
struct FitRecord {
  int fold = 0;
  NuisanceRole role = NuisanceRole::Propensity;
  std::vector<std::size_t> training_rows;
  std::vector<std::string> members;
  std::vector<double> weights;
};

struct NuisanceFits {
  Eigen::VectorXd p_hat;  ///< clipped into [trim_c, 1 - trim_c]
  Eigen::VectorXd p_raw;
  Eigen::VectorXd m0_hat;
  Eigen::VectorXd m1_hat;
  FoldPlan fold_plan;     ///< empty for externally supplied nuisances
  double trim_c = 0.01;
  std::size_t clipped_treated = 0;
  std::size_t clipped_control = 0;
  std::vector<FitRecord> log;

  std::size_t clipped() const noexcept { return clipped_treated + clipped_control; }

  /// Wraps known nuisance values (oracle arms, tests); p is clipped the same way.
  static NuisanceFits from_values(const Eigen::VectorXd& d, Eigen::VectorXd p, Eigen::VectorXd m0, Eigen::VectorXd m1,
                                  double trim_c = 0.01);
};

/// Fits p on each fold complement, m0 on its untreated rows and m1 on its
/// treated rows, predicting all three on the held-out fold. Folds run
/// concurrently; the result depends only on (ds, plan, config, seed).
NuisanceFits cross_fit(const Dataset& ds, const FoldPlan& plan, const LearnerConfig& config, double trim_c = 0.01,
                       std::uint64_t seed = 1);

struct SupportReport {
  double min = 0.0;
  double max = 0.0;
  std::vector<double> deciles;  ///< 10%, ..., 90%
  std::size_t n = 0;
  std::size_t clipped_treated = 0;
  std::size_t clipped_control = 0;
  double clip_fraction = 0.0;
  bool overlap_warning = false;  ///< clip fraction above 5%

  nlohmann::json to_json() const;
};

SupportReport support_report(const NuisanceFits& fits);

}  // namespace drgate
