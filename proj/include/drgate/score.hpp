#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include <Eigen/Dense>

#include "drgate/crossfit.hpp"
#include "drgate/data.hpp"

namespace drgate {

enum class ScoreVariant { Aipw, Ipw, Outcome };
const char* to_string(ScoreVariant v) noexcept;
ScoreVariant score_variant_from_string(const std::string& s);

/// Per-row pseudo-outcomes. `provenance` fingerprints the nuisance vectors
/// that produced them.
struct ScoreVector {
  Eigen::VectorXd psi;
  ScoreVariant variant = ScoreVariant::Aipw;
  std::uint64_t provenance = 0;

  std::size_t size() const noexcept { return static_cast<std::size_t>(psi.size()); }
};

/// D(Y - m1)/p - (1 - D)(Y - m0)/(1 - p) + m1 - m0
ScoreVector aipw_score(const Dataset& ds, const NuisanceFits& fits);
/// DY/p - (1 - D)Y/(1 - p)
ScoreVector ipw_score(const Dataset& ds, const NuisanceFits& fits);
/// m1 - m0
ScoreVector outcome_score(const Dataset& ds, const NuisanceFits& fits);
ScoreVector make_score(ScoreVariant variant, const Dataset& ds, const NuisanceFits& fits);

/// FNV-1a over the bytes of the nuisance vectors.
std::uint64_t fingerprint(const NuisanceFits& fits);

/// Columns: row, psi, variant.
void write_scores_csv(const ScoreVector& s, std::ostream& out);

}  // namespace drgate
