#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "drgate/data.hpp"
#include "drgate/kernel.hpp"
#include "drgate/score.hpp"

namespace drgate {

/// Per-query condition bits.
enum GateFlag : unsigned {
  kGateOk = 0,
  kGateUndefined = 1u << 0,        ///< kernel mass below the density floor
  kGateOutsideBox = 1u << 1,       ///< outside the 5%-95% quantile box of Z
  kGateDegenerateSe = 1u << 2,     ///< local variance zero, SE reported as 0
  kGateNegativeVariance = 1u << 3, ///< higher-order weights gave a negative local variance, clamped to 0
};
std::string describe_flags(unsigned flags);

/// GATE estimates on a query grid. Queries and estimates are on the original
/// scale of Z; `bandwidth.h` applies to standardized moderators.
struct GateCurve {
  Eigen::MatrixXd queries;  ///< one row per query
  Eigen::VectorXd estimate;
  Eigen::VectorXd std_error;
  Eigen::VectorXd ci_lower;
  Eigen::VectorXd ci_upper;
  Eigen::VectorXd n_effective;  ///< sum K / K(0)^d
  Eigen::VectorXd f_hat;        ///< density of standardized Z at the query
  std::vector<unsigned> flags;
  Bandwidth bandwidth;
  KernelSpec kernel;
  ScoreVariant variant = ScoreVariant::Aipw;
  double level = 0.95;
  std::vector<std::string> moderator_names;

  std::size_t size() const noexcept { return static_cast<std::size_t>(queries.rows()); }
  nlohmann::json to_json() const;
  void write_csv(std::ostream& out) const;
};

/// Kernel-weighted score averages with plug-in pointwise variance
///   int K^2 * sum w (psi - tau)^2 / f_hat,  SE = sigma / sqrt(N h^d).
/// A query without local data is flagged and left NaN.
GateCurve estimate_gate(const ScoreVector& psi, const Eigen::MatrixXd& z, const Eigen::MatrixXd& queries,
                        const Bandwidth& bw, const KernelSpec& spec, double level = 0.95);
GateCurve estimate_gate(const ScoreVector& psi, const Dataset& ds, const Eigen::MatrixXd& queries, const Bandwidth& bw,
                        const KernelSpec& spec, double level = 0.95);

/// Equispaced points over the [P5, P95] box of Z: a tensor grid with
/// `n_points` per axis when there are at most two moderators, otherwise
/// `n_points` observed rows inside the box.
Eigen::MatrixXd default_query_grid(const Eigen::MatrixXd& z, std::size_t n_points);
Eigen::MatrixXd default_query_grid(const Dataset& ds, std::size_t n_points);

}  // namespace drgate
