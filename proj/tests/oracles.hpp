#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <utility>

#include <Eigen/Dense>

/// Independent reference computations shared by the unit and acceptance tests.
namespace oracle {

inline double gaussian_kernel(int r, double u) {
  const double phi = std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
  if (r == 2) return phi;
  if (r == 4) return 0.5 * (3 - u * u) * phi;
  return (15 - 10 * u * u + u * u * u * u) * phi / 8.0;
}

struct GatePoint {
  double estimate = 0;
  double std_error = 0;
  double sum_k = 0;
};

/// GATE at q by explicit double loops: moderators scaled by their sample
/// mean and SD (N - 1), product kernel, plug-in variance.
inline GatePoint gate(const Eigen::VectorXd& psi, const Eigen::MatrixXd& z, const Eigen::VectorXd& q, double h, int r) {
  const auto n = z.rows(), d = z.cols();
  Eigen::VectorXd mean(d), sd(d);
  for (Eigen::Index c = 0; c < d; ++c) {
    double s = 0;
    for (Eigen::Index i = 0; i < n; ++i) s += z(i, c);
    mean[c] = s / n;
    double ss = 0;
    for (Eigen::Index i = 0; i < n; ++i) ss += (z(i, c) - mean[c]) * (z(i, c) - mean[c]);
    sd[c] = std::sqrt(ss / (n - 1));
  }
  Eigen::VectorXd k(n);
  double sum_k = 0, num = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double v = 1;
    for (Eigen::Index c = 0; c < d; ++c) v *= gaussian_kernel(r, ((z(i, c) - mean[c]) / sd[c] - (q[c] - mean[c]) / sd[c]) / h);
    k[i] = v;
    sum_k += v;
    num += v * psi[i];
  }
  GatePoint out;
  out.sum_k = sum_k;
  out.estimate = num / sum_k;
  double local = 0;
  for (Eigen::Index i = 0; i < n; ++i) local += k[i] / sum_k * (psi[i] - out.estimate) * (psi[i] - out.estimate);
  double l2 = 0;
  const double du = 1e-3;
  for (double u = -12; u < 12; u += du) l2 += gaussian_kernel(r, u) * gaussian_kernel(r, u) * du;
  out.std_error = std::sqrt(std::max(0.0, std::pow(l2, d) * local / sum_k));
  return out;
}

/// The rate inequalities for GATE (bandwidth range system) and for the smoothed ATE.
inline bool gate_conditions(double dh, int lz, int r, double dp, double dm) {
  const double eps = std::min(dp, dm);
  return 0.5 * lz * dh - eps < 0 && 0.5 + 0.5 * lz * dh - (dp + dm) < 0 && 0.5 - 0.5 * lz * dh - r * dh < 0 &&
         -dh < 0 && 1 - dh * lz > 0;
}

inline bool ate_conditions(double dh, int lz, int r, double dp, double dm) {
  const double eps = std::min(dp, dm);
  return 1 - lz * dh > 0 && 0.5 - 0.5 * lz * dh - r * dh < 0 && 1 - 4 * r * dh < 0 && 1 - 2 * lz * dh > 0 &&
         lz * dh - eps < 0 && 0.5 + lz * dh - (dp + dm) < 0;
}

/// First and last feasible delta_h on a grid of the given step over (0, 1).
template <typename Cond>
std::optional<std::pair<double, double>> scan(Cond&& feasible, double step = 1e-4) {
  std::optional<std::pair<double, double>> out;
  for (double dh = step; dh < 1.0; dh += step) {
    if (!feasible(dh)) continue;
    if (!out) out = std::make_pair(dh, dh);
    out->second = dh;
  }
  return out;
}

}  // namespace oracle
