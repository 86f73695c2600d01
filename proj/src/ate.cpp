#include "drgate/ate.hpp"

#include <cmath>

#include "drgate/error.hpp"
#include "drgate/stats.hpp"

namespace drgate {

namespace {

constexpr const char* kModule = "ate";

AteMethod smoothed_method(ScoreVariant v) {
  switch (v) {
    case ScoreVariant::Ipw: return AteMethod::SmoothedIpw;
    case ScoreVariant::Outcome: return AteMethod::SmoothedOutcome;
    default: return AteMethod::SmoothedAipw;
  }
}

AteMethod averaged_method(ScoreVariant v) {
  switch (v) {
    case ScoreVariant::Ipw: return AteMethod::AveragedIpw;
    case ScoreVariant::Outcome: return AteMethod::AveragedOutcome;
    default: return AteMethod::AveragedAipw;
  }
}

void finish(AteResult& r, const Eigen::VectorXd& psi, double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::Validation, kModule, "level must lie in (0, 1)");
  if (psi.size() < 2) throw Error(ErrorKind::Validation, kModule, "need at least two scores");
  r.n = static_cast<std::size_t>(psi.size());
  r.level = level;
  r.std_error = stats::sample_sd(stats::view(psi)) / std::sqrt(static_cast<double>(r.n));
  const double c = stats::critical_value(level);
  r.ci_lower = r.estimate - c * r.std_error;
  r.ci_upper = r.estimate + c * r.std_error;
}

}  // namespace

const char* to_string(AteMethod m) noexcept {
  switch (m) {
    case AteMethod::SmoothedAipw: return "SMOOTHED_AIPW";
    case AteMethod::SmoothedIpw: return "SMOOTHED_IPW";
    case AteMethod::SmoothedOutcome: return "SMOOTHED_OUTCOME";
    case AteMethod::AveragedAipw: return "AVERAGED_AIPW";
    case AteMethod::AveragedIpw: return "AVERAGED_IPW";
    case AteMethod::AveragedOutcome: return "AVERAGED_OUTCOME";
  }
  return "?";
}

AteResult smoothed_ate(const ScoreVector& psi, const Eigen::MatrixXd& z, const Bandwidth& bw, const KernelSpec& spec,
                       double level) {
  if (static_cast<Eigen::Index>(psi.size()) != z.rows())
    throw Error(ErrorKind::Validation, kModule, "score length does not match the moderator rows");
  const auto scaler = ZScaler::fit(z);
  const auto sums = observation_sums(psi.psi, scaler.apply(z), bw.h, spec);
  const double floor = kDensityFloor * static_cast<double>(z.rows());
  std::vector<Eigen::Index> bad;
  for (Eigen::Index j = 0; j < z.rows(); ++j)
    if (!(sums.mass[j] >= floor)) bad.push_back(j);
  if (!bad.empty()) {
    std::string rows;
    for (std::size_t k = 0; k < std::min<std::size_t>(bad.size(), 10); ++k) rows += (k ? ", " : "") + std::to_string(bad[k]);
    if (bad.size() > 10) rows += ", ... (" + std::to_string(bad.size()) + " rows)";
    throw Error(ErrorKind::NoLocalData, kModule, "no local data at observation rows " + rows,
                "the bandwidth is too small for the smoothed ATE; increase it");
  }
  AteResult r;
  r.method = smoothed_method(psi.variant);
  r.estimate = (sums.weighted.array() / sums.mass.array()).mean();
  r.bandwidth = bw;
  r.kernel_order = spec.order;
  finish(r, psi.psi, level);
  return r;
}

AteResult smoothed_ate(const ScoreVector& psi, const Dataset& ds, const Bandwidth& bw, const KernelSpec& spec,
                       double level) {
  auto r = smoothed_ate(psi, ds.z(), bw, spec, level);
  r.smoothing_moderators = ds.z_names();
  return r;
}

AteResult averaged_ate(const ScoreVector& psi, double level) {
  AteResult r;
  r.method = averaged_method(psi.variant);
  r.estimate = psi.psi.mean();
  finish(r, psi.psi, level);
  return r;
}

nlohmann::json AteResult::to_json() const {
  nlohmann::json j{{"method", to_string(method)},
                   {"estimate", estimate},
                   {"se", std_error},
                   {"ci", {ci_lower, ci_upper}},
                   {"level", level},
                   {"n", n}};
  if (!smoothing_moderators.empty()) j["smoothing_moderators"] = smoothing_moderators;
  if (bandwidth)
    j["bandwidth"] = {{"h", bandwidth->h},
                      {"raw", bandwidth->raw},
                      {"undersmooth_factor", bandwidth->undersmooth_factor},
                      {"source", to_string(bandwidth->source)}};
  if (kernel_order) j["kernel_order"] = *kernel_order;
  if (!warnings.empty()) j["warnings"] = warnings;
  return j;
}

AteComparison compare_ate(std::vector<AteResult> results) {
  if (results.size() < 2) throw Error(ErrorKind::Validation, kModule, "comparison needs at least two results");
  AteComparison c;
  c.results = std::move(results);
  for (std::size_t a = 0; a < c.results.size(); ++a)
    for (std::size_t b = a + 1; b < c.results.size(); ++b) {
      const auto& x = c.results[a];
      const auto& y = c.results[b];
      AteComparison::Pair p{a, b, x.estimate - y.estimate, 0.0, 0.0};
      const double se = std::max(x.std_error, y.std_error);
      p.in_larger_se = se > 0.0 ? p.difference / se : (p.difference == 0.0 ? 0.0 : std::copysign(INFINITY, p.difference));
      p.se_ratio = y.std_error > 0.0 ? x.std_error / y.std_error : NAN;
      c.pairs.push_back(p);
    }
  return c;
}

nlohmann::json AteComparison::to_json() const {
  nlohmann::json j{{"results", nlohmann::json::array()}, {"pairs", nlohmann::json::array()}};
  for (const auto& r : results) j["results"].push_back(r.to_json());
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  for (const auto& p : pairs)
    j["pairs"].push_back({{"first", to_string(results[p.first].method)},
                          {"second", to_string(results[p.second].method)},
                          {"first_index", p.first},
                          {"second_index", p.second},
                          {"difference", p.difference},
                          {"difference_in_larger_se", num(p.in_larger_se)},
                          {"se_ratio", num(p.se_ratio)}});
  return j;
}

}  // namespace drgate
