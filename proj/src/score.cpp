#include "drgate/score.hpp"

#include <cstring>
#include <iomanip>
#include <ostream>

#include "drgate/error.hpp"

namespace drgate {

namespace {

constexpr const char* kModule = "score";

void check(const Dataset& ds, const NuisanceFits& fits, bool needs_p) {
  const auto n = static_cast<Eigen::Index>(ds.n());
  if (fits.m0_hat.size() != n || fits.m1_hat.size() != n || fits.p_hat.size() != n)
    throw Error(ErrorKind::Validation, kModule, "nuisance fits do not match the dataset length");
  if (needs_p) {
    const double lo = fits.p_hat.minCoeff(), hi = fits.p_hat.maxCoeff();
    if (!(lo > 0.0 && hi < 1.0) || lo < fits.trim_c - 1e-15 || hi > 1.0 - fits.trim_c + 1e-15)
      throw Error(ErrorKind::Validation, kModule, "propensity predictions outside [trim_c, 1 - trim_c]");
  }
}

void fnv(std::uint64_t& h, const Eigen::VectorXd& v) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
  for (std::size_t k = 0; k < static_cast<std::size_t>(v.size()) * sizeof(double); ++k) {
    h ^= bytes[k];
    h *= 0x100000001b3ULL;
  }
}

}  // namespace

const char* to_string(ScoreVariant v) noexcept {
  switch (v) {
    case ScoreVariant::Aipw: return "aipw";
    case ScoreVariant::Ipw: return "ipw";
    case ScoreVariant::Outcome: return "outcome";
  }
  return "?";
}

ScoreVariant score_variant_from_string(const std::string& s) {
  for (auto v : {ScoreVariant::Aipw, ScoreVariant::Ipw, ScoreVariant::Outcome})
    if (s == to_string(v)) return v;
  throw Error(ErrorKind::Configuration, kModule, "unknown score variant '" + s + "'", "use aipw, ipw or outcome");
}

std::uint64_t fingerprint(const NuisanceFits& fits) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  fnv(h, fits.p_hat);
  fnv(h, fits.m0_hat);
  fnv(h, fits.m1_hat);
  return h;
}

ScoreVector aipw_score(const Dataset& ds, const NuisanceFits& fits) {
  check(ds, fits, true);
  const auto& d = ds.d().array();
  const auto& y = ds.y().array();
  const auto& p = fits.p_hat.array();
  const auto& m0 = fits.m0_hat.array();
  const auto& m1 = fits.m1_hat.array();
  ScoreVector s;
  s.psi = d * (y - m1) / p - (1.0 - d) * (y - m0) / (1.0 - p) + m1 - m0;
  s.variant = ScoreVariant::Aipw;
  s.provenance = fingerprint(fits);
  return s;
}

ScoreVector ipw_score(const Dataset& ds, const NuisanceFits& fits) {
  check(ds, fits, true);
  const auto& d = ds.d().array();
  const auto& y = ds.y().array();
  const auto& p = fits.p_hat.array();
  ScoreVector s;
  s.psi = d * y / p - (1.0 - d) * y / (1.0 - p);
  s.variant = ScoreVariant::Ipw;
  s.provenance = fingerprint(fits);
  return s;
}

ScoreVector outcome_score(const Dataset& ds, const NuisanceFits& fits) {
  check(ds, fits, false);
  ScoreVector s;
  s.psi = fits.m1_hat - fits.m0_hat;
  s.variant = ScoreVariant::Outcome;
  s.provenance = fingerprint(fits);
  return s;
}

ScoreVector make_score(ScoreVariant variant, const Dataset& ds, const NuisanceFits& fits) {
  switch (variant) {
    case ScoreVariant::Aipw: return aipw_score(ds, fits);
    case ScoreVariant::Ipw: return ipw_score(ds, fits);
    case ScoreVariant::Outcome: return outcome_score(ds, fits);
  }
  throw Error(ErrorKind::Configuration, kModule, "unknown score variant");
}

void write_scores_csv(const ScoreVector& s, std::ostream& out) {
  out << "row,psi,variant\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < s.psi.size(); ++i) out << i << ',' << s.psi[i] << ',' << to_string(s.variant) << '\n';
}

}  // namespace drgate
