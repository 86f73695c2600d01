#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Dense>
#include <json.hpp>

#include "drgate/ate.hpp"
#include "drgate/crossfit.hpp"
#include "drgate/gate.hpp"
#include "drgate/kernel.hpp"
#include "drgate/score.hpp"

namespace drgate {

/// Everything between a Dataset and the GATE/ATE outputs.
struct PipelineConfig {
  LearnerConfig learners = LearnerConfig::ensemble_default();
  int folds = 2;
  bool stratify = true;
  double trim_c = 0.01;
  KernelSpec kernel;
  BandwidthConfig bandwidth;
  double level = 0.95;
  ScoreVariant score = ScoreVariant::Aipw;

  static PipelineConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct StageOptions {
  bool gate = true;
  bool smoothed_ate = true;
  bool ipw_gate = false;  ///< also smooth IPW scores at the same queries and bandwidth
};

struct PipelineResult {
  NuisanceFits fits;
  ScoreVector psi;  ///< the configured variant
  ScoreVector aipw;
  ScoreVector ipw;
  Bandwidth bandwidth;
  std::optional<GateCurve> gate;
  std::optional<GateCurve> ipw_gate;
  std::optional<AteResult> smoothed;
  AteResult averaged_aipw;
  AteResult averaged_ipw;
};

FoldPlan make_plan(const Dataset& ds, const PipelineConfig& cfg, std::uint64_t seed);

/// Cross-fits the nuisances, then runs the second stage.
PipelineResult run_pipeline(const Dataset& ds, const PipelineConfig& cfg, const Eigen::MatrixXd& queries,
                            std::uint64_t seed, const StageOptions& opts = {});

/// Second stage only, for supplied nuisances.
PipelineResult run_second_stage(const Dataset& ds, NuisanceFits fits, const PipelineConfig& cfg,
                                const Eigen::MatrixXd& queries, const StageOptions& opts = {});

}  // namespace drgate
