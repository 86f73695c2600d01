#pragma once

#include <string>
#include <vector>

#include <json.hpp>

/// Design-time rate calculus: with h = O(N^-delta_h) and first-stage errors
/// O(N^-delta), which bandwidth exponents satisfy the coupled convergence
/// conditions for GATE and for the smoothed ATE.
namespace drgate::theory {

enum class Regime { Gate, Ate };
const char* to_string(Regime r) noexcept;
Regime regime_from_string(const std::string& s);

struct RateSpec {
  int lambda_z = 1;
  int r = 2;
  double delta_p = 0.25;
  double delta_m = 0.25;

  /// Throws a validation error unless lambda_z >= 1, r is even and positive,
  /// and both exponents lie in (0, 1/2].
  void validate() const;
  double joint() const noexcept { return delta_p + delta_m; }
};

struct RateRange {
  Regime regime = Regime::Gate;
  double lower = 0.0;
  double upper = 0.0;
  bool feasible = false;
  double min_kernel_order = 0.0;  ///< +inf when no order suffices

  nlohmann::json to_json() const;
};

/// 1/(lz + 2r) < delta_h < (2(dp + dm) - 1)/lz
RateRange gate_range(const RateSpec& spec);
/// max(1/(4r), 1/(lz + 2r)) < delta_h < ((dp + dm) - 1/2)/lz
RateRange ate_range(const RateSpec& spec);
RateRange range(const RateSpec& spec, Regime regime);

/// Smallest dp + dm for which the range is non-empty (strictly above it).
double gate_threshold(int lambda_z, int r);
double ate_threshold(int lambda_z, int r);

struct ConditionCheck {
  std::string item;        ///< "i", "ii", ...
  std::string inequality;
  double value = 0.0;      ///< left-hand side, compared against zero
  bool pass = false;
};

struct Diagnostic {
  Regime regime = Regime::Gate;
  double delta_h = 0.0;
  std::vector<ConditionCheck> checks;
  bool all_pass = false;

  nlohmann::json to_json() const;
};

/// Evaluates each inequality of the regime's condition list at delta_h.
/// The worst first-stage exponent is min(delta_p, delta_m).
Diagnostic check_config(const RateSpec& spec, double delta_h, Regime regime);

/// delta_h implied by a realized bandwidth: h = N^-delta_h.
double bandwidth_exponent(double h, std::size_t n);

/// s^2 log^2 max(lambda_x, N) / (N h^lambda_z); should be small for the
/// Lasso illustration of the GATE rate condition.
double lasso_rate_ratio(double s, std::size_t lambda_x, std::size_t n, double h, int lambda_z);

}  // namespace drgate::theory
