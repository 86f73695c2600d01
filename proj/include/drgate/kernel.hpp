#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace drgate {

/// Gaussian kernel of even order r in {2, 4, 6}.
struct KernelSpec {
  int order = 2;

  static KernelSpec make(int order);
};

double kernel_eval(const KernelSpec& spec, double u) noexcept;
/// Integral of K(u)^2 over the real line for the univariate kernel.
double kernel_l2_norm(const KernelSpec& spec) noexcept;
/// prod_k K((zi[k] - z[k]) / h)
double product_kernel(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& zi,
                      const Eigen::Ref<const Eigen::VectorXd>& z, double h);

enum class BandwidthSource { Loocv, Manual, Rule };
const char* to_string(BandwidthSource s) noexcept;

/// One bandwidth shared by every moderator. `raw` is the value before the
/// undersmoothing factor, so h = raw * undersmooth_factor.
struct Bandwidth {
  double h = 1.0;
  double undersmooth_factor = 1.0;
  BandwidthSource source = BandwidthSource::Manual;
  double raw = 1.0;

  static Bandwidth manual(double h);
  Bandwidth scaled(double multiple) const;
};

/// Centers and scales moderators by their sample mean and SD.
struct ZScaler {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd sd;

  static ZScaler fit(const Eigen::MatrixXd& z);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& z) const;
};

/// Signed kernel mass below which a query has no local data: 1e-10 * N.
inline constexpr double kDensityFloor = 1e-10;

struct NwFit {
  double estimate = 0.0;
  Eigen::VectorXd weights;  ///< K_i / sum K, sums to one
  double f_hat = 0.0;       ///< sum K / (N h^d)
  double sum_k = 0.0;
};

/// Local-constant regression of psi on z at one query point. Throws
/// NoLocalData when the kernel mass falls below the density floor.
NwFit nw_regress(const Eigen::VectorXd& psi, const Eigen::MatrixXd& z, const Eigen::Ref<const Eigen::VectorXd>& query,
                 double h, const KernelSpec& spec);

/// Kernel sums at every observation, including the observation itself:
/// mass[j] = sum_i K_ij and weighted[j] = sum_i K_ij psi_i.
struct ObservationSums {
  Eigen::VectorXd mass;
  Eigen::VectorXd weighted;
};
ObservationSums observation_sums(const Eigen::VectorXd& psi, const Eigen::MatrixXd& z, double h, const KernelSpec& spec);

double kde(const Eigen::MatrixXd& z, const Eigen::Ref<const Eigen::VectorXd>& query, double h, const KernelSpec& spec);

/// 40 log-spaced points over [0.05, 2] * (4 / ((d + 2) N))^(1 / (d + 4)),
/// the normal-reference bandwidth for unit-variance moderators.
std::vector<double> default_bandwidth_grid(std::size_t n, std::size_t dims, int points = 40);

struct LoocvResult {
  Bandwidth bandwidth;
  std::vector<double> grid;       ///< ascending
  std::vector<double> criterion;  ///< sum of squared leave-one-out errors per grid point
  std::size_t index = 0;
};

/// Leave-one-out cross-validation over `grid`; the chosen point is multiplied
/// by `undersmooth_factor`.
LoocvResult loocv_bandwidth(const Eigen::VectorXd& psi, const Eigen::MatrixXd& z, const KernelSpec& spec,
                            std::vector<double> grid, double undersmooth_factor = 0.9);

enum class BandwidthMode { Loocv, Manual, Rule };

/// How a run picks h for standardized moderators: leave-one-out CV times the
/// undersmoothing factor, a fixed value, or scale * N^-exponent.
struct BandwidthConfig {
  BandwidthMode mode = BandwidthMode::Loocv;
  double value = 0.0;
  double scale = 1.0;
  double exponent = 0.25;
  double undersmooth_factor = 0.9;
  std::vector<double> grid;  ///< LOOCV grid; empty means the default grid

  static BandwidthConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Resolves the configured bandwidth for scores `psi` at raw moderators `z`.
Bandwidth select_bandwidth(const BandwidthConfig& cfg, const Eigen::VectorXd& psi, const Eigen::MatrixXd& z,
                           const KernelSpec& spec);

}  // namespace drgate
