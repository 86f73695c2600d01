#pragma once

#include <vector>

#include <Eigen/Dense>

#include "drgate/learners.hpp"

namespace drgate::learn::detail {

/// Weighted elastic-net coordinate descent on a fixed design:
///   (1/2N) sum_i w_i (z_i - b0 - g_i beta)^2 + lambda (alpha |beta|_1 + (1-alpha)/2 |beta|^2).
/// Keeps the residual in sync with (b0, beta) so consecutive solves along a
/// lambda path warm-start from the previous solution.
class CoordinateDescent {
 public:
  /// `weights` may be empty (unit weights). Columns flagged in `skip` stay at zero.
  CoordinateDescent(const Eigen::MatrixXd& g, const Eigen::VectorXd& z, Eigen::VectorXd weights,
                    std::vector<bool> skip, bool fit_intercept);

  /// Returns the number of sweeps used. Throws ConvergenceError past opts.max_sweeps.
  int solve(double lambda, double alpha, const CdOptions& opts);
  double kkt_residual(double lambda, double alpha) const;

  /// Replaces the working response (and weights) keeping the current coefficients.
  void reset_response(const Eigen::VectorXd& z, Eigen::VectorXd weights);

  double intercept() const noexcept { return b0_; }
  const Eigen::VectorXd& beta() const noexcept { return beta_; }

 private:
  double update_coordinate(Eigen::Index j, double lambda, double alpha);
  double update_intercept();
  void refresh_residual();

  const Eigen::MatrixXd& g_;
  Eigen::VectorXd z_;
  Eigen::VectorXd w_;
  Eigen::MatrixXd wg_;  // w .* g, only when weighted
  bool weighted_;
  std::vector<bool> skip_;
  bool fit_intercept_;
  Eigen::VectorXd col_scale_;  // (1/N) sum w g^2
  double wsum_;
  double b0_ = 0.0;
  Eigen::VectorXd beta_;
  Eigen::VectorXd r_;
};

struct PathPoint {
  double intercept = 0.0;
  Eigen::VectorXd beta;
  bool converged = true;
};

/// Warm-started elastic-net solutions for a descending lambda sequence on a
/// standardized design. Non-converged points are flagged, not thrown.
std::vector<PathPoint> elastic_net_path(const Eigen::MatrixXd& g, const Eigen::VectorXd& t, const std::vector<bool>& skip,
                                        const std::vector<double>& lambdas, double alpha, const CdOptions& opts);

/// Exact ridge solutions sum (t - yhat)^2 + lambda |beta|^2 for several lambdas
/// from one eigendecomposition. Lambdas here are on the sum-of-squares scale.
std::vector<PathPoint> ridge_path(const Eigen::MatrixXd& g, const Eigen::VectorXd& t, const std::vector<bool>& skip,
                                  const std::vector<double>& lambdas);

/// Warm-started penalized logistic regression along a descending lambda sequence.
std::vector<PathPoint> logit_path(const Eigen::MatrixXd& g, const Eigen::VectorXd& y, const std::vector<bool>& skip,
                                  const std::vector<double>& lambdas, double alpha, const IrlsOptions& irls,
                                  const CdOptions& cd);

inline double soft_threshold(double x, double t) noexcept {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

}  // namespace drgate::learn::detail
