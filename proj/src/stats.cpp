#include "drgate/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "drgate/error.hpp"
#include "drgate/parallel.hpp"

namespace drgate {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Configuration: return "configuration error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Numerical: return "numerical error";
    case ErrorKind::Convergence: return "convergence error";
    case ErrorKind::Separation: return "separation error";
    case ErrorKind::Resource: return "resource error";
    case ErrorKind::NoLocalData: return "no local data";
    case ErrorKind::BandwidthSelection: return "bandwidth-selection error";
    case ErrorKind::Stratification: return "stratification error";
    case ErrorKind::Aggregate: return "aggregate error";
  }
  return "error";
}

namespace {
std::atomic<std::size_t> g_max_threads{0};
}

void set_max_threads(std::size_t n) noexcept { g_max_threads = n; }

std::size_t max_threads() noexcept {
  const std::size_t n = g_max_threads.load();
  if (n > 0) return n;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

}  // namespace drgate

namespace drgate::stats {

double mean(std::span<const double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double quantile(std::span<const double> v, double prob) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  const double pos = prob * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return s[lo] + frac * (s[hi] - s[lo]);
}

double normal_pdf(double x) noexcept {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double critical_value(double level) {
  if (!(level > 0.0 && level < 1.0))
    throw Error(ErrorKind::Validation, "stats", "confidence level must lie in (0,1)");
  return normal_quantile(1.0 - (1.0 - level) / 2.0);
}

}  // namespace drgate::stats
