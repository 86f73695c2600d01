#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "drgate/data.hpp"
#include "drgate/kernel.hpp"
#include "drgate/score.hpp"

namespace drgate {

enum class AteMethod { SmoothedAipw, SmoothedIpw, SmoothedOutcome, AveragedAipw, AveragedIpw, AveragedOutcome };
const char* to_string(AteMethod m) noexcept;

struct AteResult {
  AteMethod method = AteMethod::AveragedAipw;
  double estimate = 0.0;
  double std_error = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double level = 0.95;
  std::size_t n = 0;
  std::vector<std::string> smoothing_moderators;  ///< empty for averaged estimators
  std::optional<Bandwidth> bandwidth;
  std::optional<int> kernel_order;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

/// Averages GATE predictions at every observation, each computed from the
/// full sample including the observation itself. The standard error is the
/// score's sample SD over sqrt(N). Throws NoLocalData naming the rows whose
/// kernel mass falls below the density floor.
AteResult smoothed_ate(const ScoreVector& psi, const Eigen::MatrixXd& z, const Bandwidth& bw, const KernelSpec& spec,
                       double level = 0.95);
AteResult smoothed_ate(const ScoreVector& psi, const Dataset& ds, const Bandwidth& bw, const KernelSpec& spec,
                       double level = 0.95);

/// mean(psi) with SE = SD(psi) / sqrt(N).
AteResult averaged_ate(const ScoreVector& psi, double level = 0.95);

struct AteComparison {
  struct Pair {
    std::size_t first = 0;
    std::size_t second = 0;
    double difference = 0.0;      ///< first - second
    double in_larger_se = 0.0;    ///< difference / max(SE)
    double se_ratio = 0.0;        ///< SE(first) / SE(second)
  };
  std::vector<AteResult> results;
  std::vector<Pair> pairs;

  nlohmann::json to_json() const;
};

AteComparison compare_ate(std::vector<AteResult> results);

}  // namespace drgate
