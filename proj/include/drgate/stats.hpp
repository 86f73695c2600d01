#pragma once

#include <Eigen/Dense>
#include <span>

namespace drgate::stats {

double mean(std::span<const double> v);
/// Sample standard deviation with the N-1 denominator.
double sample_sd(std::span<const double> v);
/// Linear-interpolation quantile (Hyndman-Fan type 7), prob in [0,1].
double quantile(std::span<const double> v, double prob);

double normal_pdf(double x) noexcept;
/// Inverse of the standard normal CDF.
double normal_quantile(double p);
/// Two-sided critical value for a confidence level in (0,1).
double critical_value(double level);

inline std::span<const double> view(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace drgate::stats
