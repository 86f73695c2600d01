#include "drgate/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "drgate/error.hpp"

namespace drgate::theory {

namespace {

constexpr const char* kModule = "theory";
constexpr double kInf = std::numeric_limits<double>::infinity();

nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

ConditionCheck less_than_zero(std::string item, std::string text, double v) {
  return {std::move(item), std::move(text), v, v < 0.0};
}

ConditionCheck greater_than_zero(std::string item, std::string text, double v) {
  return {std::move(item), std::move(text), v, v > 0.0};
}

}  // namespace

const char* to_string(Regime r) noexcept { return r == Regime::Gate ? "gate" : "ate"; }

Regime regime_from_string(const std::string& s) {
  if (s == "gate" || s == "GATE") return Regime::Gate;
  if (s == "ate" || s == "ATE") return Regime::Ate;
  throw Error(ErrorKind::Validation, kModule, "regime must be gate or ate");
}

void RateSpec::validate() const {
  if (lambda_z < 1) throw Error(ErrorKind::Validation, kModule, "lambda_z must be at least 1");
  if (r < 2 || r % 2 != 0) throw Error(ErrorKind::Validation, kModule, "kernel order must be an even integer >= 2");
  for (double d : {delta_p, delta_m})
    if (!(d > 0.0 && d <= 0.5))
      throw Error(ErrorKind::Validation, kModule, "convergence exponents must lie in (0, 1/2]",
                  "a root-N consistent first stage has exponent 1/2");
}

nlohmann::json RateRange::to_json() const {
  return {{"regime", to_string(regime)},
          {"lower", lower},
          {"upper", upper},
          {"feasible", feasible},
          {"min_kernel_order", number(min_kernel_order)}};
}

RateRange gate_range(const RateSpec& spec) {
  spec.validate();
  const double lz = spec.lambda_z;
  const double s = spec.joint();
  RateRange out;
  out.regime = Regime::Gate;
  out.lower = 1.0 / (lz + 2.0 * spec.r);
  out.upper = (2.0 * s - 1.0) / lz;
  out.feasible = out.lower < out.upper;
  out.min_kernel_order = 2.0 * s - 1.0 > 0.0 ? lz * (1.0 - s) / (2.0 * s - 1.0) : kInf;
  return out;
}

RateRange ate_range(const RateSpec& spec) {
  spec.validate();
  const double lz = spec.lambda_z;
  const double s = spec.joint();
  RateRange out;
  out.regime = Regime::Ate;
  out.lower = std::max(1.0 / (4.0 * spec.r), 1.0 / (lz + 2.0 * spec.r));
  out.upper = (s - 0.5) / lz;
  out.feasible = out.lower < out.upper;
  out.min_kernel_order = 2.0 * s - 1.0 > 0.0 ? lz * (1.5 - s) / (2.0 * s - 1.0) : kInf;
  return out;
}

RateRange range(const RateSpec& spec, Regime regime) {
  return regime == Regime::Gate ? gate_range(spec) : ate_range(spec);
}

double gate_threshold(int lambda_z, int r) {
  return static_cast<double>(lambda_z + r) / static_cast<double>(lambda_z + 2 * r);
}

double ate_threshold(int lambda_z, int r) {
  const double lower = std::max(1.0 / (4.0 * r), 1.0 / (lambda_z + 2.0 * r));
  return 0.5 + lambda_z * lower;
}

Diagnostic check_config(const RateSpec& spec, double delta_h, Regime regime) {
  spec.validate();
  if (!(delta_h > 0.0)) throw Error(ErrorKind::Validation, kModule, "bandwidth exponent must be positive");
  const double lz = spec.lambda_z;
  const double r = spec.r;
  const double s = spec.joint();
  const double worst = std::min(spec.delta_p, spec.delta_m);
  const double dh = delta_h;

  Diagnostic d;
  d.regime = regime;
  d.delta_h = delta_h;
  auto& c = d.checks;
  c.push_back(greater_than_zero("i", "1 - lz*dh > 0", 1.0 - lz * dh));
  c.push_back(less_than_zero("ii", "1/2 - (lz/2)*dh - r*dh < 0", 0.5 - 0.5 * lz * dh - r * dh));
  if (regime == Regime::Gate) {
    c.push_back(less_than_zero("iii", "(lz/2)*dh - min(dp, dm) < 0", 0.5 * lz * dh - worst));
    c.push_back(less_than_zero("iv", "1/2 + (lz/2)*dh - (dp + dm) < 0", 0.5 + 0.5 * lz * dh - s));
  } else {
    c.push_back(less_than_zero("iii", "1 - 4r*dh < 0", 1.0 - 4.0 * r * dh));
    c.push_back(greater_than_zero("iii", "1 - 2lz*dh > 0", 1.0 - 2.0 * lz * dh));
    c.push_back(less_than_zero("iv", "lz*dh - min(dp, dm) < 0", lz * dh - worst));
    c.push_back(less_than_zero("v", "1/2 + lz*dh - (dp + dm) < 0", 0.5 + lz * dh - s));
  }
  d.all_pass = std::all_of(c.begin(), c.end(), [](const ConditionCheck& x) { return x.pass; });
  return d;
}

nlohmann::json Diagnostic::to_json() const {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& c : checks)
    items.push_back({{"item", c.item}, {"inequality", c.inequality}, {"value", c.value}, {"pass", c.pass}});
  return {{"regime", to_string(regime)}, {"delta_h", delta_h}, {"all_pass", all_pass}, {"checks", items}};
}

double bandwidth_exponent(double h, std::size_t n) {
  if (!(h > 0.0) || n < 2) throw Error(ErrorKind::Validation, kModule, "need h > 0 and N >= 2");
  return -std::log(h) / std::log(static_cast<double>(n));
}

double lasso_rate_ratio(double s, std::size_t lambda_x, std::size_t n, double h, int lambda_z) {
  if (!(h > 0.0) || n < 2) throw Error(ErrorKind::Validation, kModule, "need h > 0 and N >= 2");
  const double l = std::log(static_cast<double>(std::max(lambda_x, n)));
  return s * s * l * l / (static_cast<double>(n) * std::pow(h, lambda_z));
}

}  // namespace drgate::theory
