#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "drgate/data.hpp"
#include "drgate/pipeline.hpp"

/// Synthetic designs with known nuisances and effects, and a Monte Carlo
/// engine that runs the full pipeline on them.
namespace drgate::sim {

enum class TauShape { Constant, Linear, Sine };
const char* to_string(TauShape s) noexcept;
TauShape tau_shape_from_string(const std::string& s);

/// X ~ N(0, I); Z = first lambda_z columns of X; with the sparse index
/// iota = sum_{j<s} x_j / sqrt(s):
///   p(x)  = logistic(overlap_strength * iota)
///   m0(x) = outcome_strength * iota
///   m1(x) = m0(x) + tau(z)
///   Y     = m_D(X) + noise_sd * e
/// tau(z) is level (CONSTANT), level + sum z_k (LINEAR) or
/// level + sum sin(2 z_k) (SINE); in every case theta = level.
struct DgpSpec {
  std::size_t n = 2000;
  std::size_t lambda_x = 10;
  std::size_t lambda_z = 1;
  std::size_t s = 5;
  TauShape tau_shape = TauShape::Sine;
  double tau_level = 1.0;
  double overlap_strength = 0.8;
  double outcome_strength = 1.0;
  double noise_sd = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
  /// True when p lies in [0.05, 0.95] with probability at least 0.99.
  bool overlap_ok() const noexcept;
  static DgpSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

double tau_at(const DgpSpec& spec, const Eigen::Ref<const Eigen::RowVectorXd>& z);
double true_theta(const DgpSpec& spec) noexcept;
/// Var tau(Z) in closed form.
double tau_variance(const DgpSpec& spec) noexcept;
/// E[Var(Y|1,X)/p + Var(Y|0,X)/(1-p) + (m1 - m0 - theta)^2]
///   = noise_sd^2 (2 + 2 exp(a^2 / 2)) + Var tau(Z).
double hahn_bound(const DgpSpec& spec) noexcept;

struct Truth {
  Eigen::VectorXd p;
  Eigen::VectorXd m0;
  Eigen::VectorXd m1;
  Eigen::VectorXd tau;
  double theta = 0.0;
};

struct Simulated {
  Dataset data;
  Truth truth;
};

Simulated generate(const DgpSpec& spec);

/// One way of producing nuisances: a learner configuration, or the truth.
struct ArmSpec {
  std::string name;
  bool oracle = false;
  LearnerConfig learners;

  /// "correct", "p_wrong", "m_wrong", "both_wrong" (the wrong side uses the
  /// sample mean) or "oracle".
  static ArmSpec preset(const std::string& name, const LearnerConfig& base);
  static ArmSpec from_json(const nlohmann::json& j, const LearnerConfig& base);
  nlohmann::json to_json() const;
};

struct McConfig {
  DgpSpec dgp;
  PipelineConfig pipeline;
  std::vector<ArmSpec> arms;
  Eigen::MatrixXd queries;  ///< empty: -1, -0.5, 0, 0.5, 1 on every moderator axis
  int replications = 20;
  StageOptions stages;
  double max_failure_fraction = 0.05;
  std::uint64_t seed = 1;

  static McConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  Eigen::MatrixXd query_points() const;
};

struct ArmReplication {
  bool ok = false;
  std::string error;
  double aipw = 0, aipw_se = 0;
  double ipw = 0, ipw_se = 0;
  double smoothed = 0, smoothed_se = 0;
  double mean_psi_oracle_gap = 0;  ///< mean(psi) - theta
  double bandwidth = 0;
  std::size_t clipped = 0;
  Eigen::VectorXd gate, gate_se, ipw_gate_se;
};

struct QuerySummary {
  std::vector<double> z;
  double truth = 0, mean = 0, bias = 0, rmse = 0, coverage = 0, mean_se = 0, sd = 0, se_calibration = 0;
};

struct EstimatorSummary {
  std::string method;
  double truth = 0, mean = 0, bias = 0, mc_se = 0, rmse = 0, coverage = 0, mean_se = 0, sd = 0;
  double scaled_variance = 0;  ///< N * Var(estimate) across replications
};

struct ArmSummary {
  std::string name;
  std::size_t successes = 0;
  std::size_t failures = 0;
  std::vector<std::string> errors;  ///< first few failure messages
  std::vector<QuerySummary> gate;
  std::vector<EstimatorSummary> ate;
  double smoothed_close_fraction = 0;  ///< share with |smoothed - averaged| < 0.5 SE
  double ipw_se_larger_fraction = 0;   ///< share with SE(IPW) > SE(AIPW)
  double ipw_gate_se_larger_fraction = 0;
  double mean_clipped = 0;

  const EstimatorSummary* estimator(const std::string& method) const;
};

struct McReport {
  int replications = 0;
  double theta = 0;
  double hahn_bound = 0;
  std::vector<ArmSummary> arms;
  std::vector<std::vector<ArmReplication>> records;  ///< [arm][replication]
  nlohmann::json config;

  const ArmSummary* arm(const std::string& name) const;
  nlohmann::json to_json() const;
  void write_replications_csv(std::ostream& out) const;
};

/// Runs every arm on each replication's dataset (common random numbers
/// across arms). Replication seeds derive from config.seed; aggregation is
/// ordered by replication index. Throws an aggregate error when an arm fails
/// on more than max_failure_fraction of replications.
McReport run_mc(const McConfig& config);

}  // namespace drgate::sim
