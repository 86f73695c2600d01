#include "drgate/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "drgate/error.hpp"
#include "drgate/parallel.hpp"

namespace drgate {

namespace {

constexpr const char* kModule = "kernel";
const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

/// Polynomial factor of the order-r Gaussian kernel as a function of s = u^2.
inline double poly(int order, double s) noexcept {
  switch (order) {
    case 4: return 0.5 * (3.0 - s);
    case 6: return 0.125 * (15.0 - 10.0 * s + s * s);
    default: return 1.0;
  }
}

/// Product kernel from per-dimension squared scaled differences.
inline double product_from_squares(int order, const double* s, std::size_t dims, double norm) noexcept {
  double total = 0.0;
  double p = 1.0;
  for (std::size_t k = 0; k < dims; ++k) {
    total += s[k];
    if (order != 2) p *= poly(order, s[k]);
  }
  return norm * p * std::exp(-0.5 * total);
}

/// Calls fn(i, j) for every ordered pair with the row sums accumulated in
/// ascending i for each j, whether or not the work is split across threads.
/// `fn(j, i, symmetric)` must add row i's contribution to j, and also j's
/// contribution to i when `symmetric` is set.
template <typename Fn>
void for_each_pair(std::size_t n, Fn&& fn) {
  if (detail::in_parallel_region || max_threads() <= 1) {
    for (std::size_t a = 0; a < n; ++a) {
      fn(a, a, false);
      for (std::size_t b = a + 1; b < n; ++b) fn(b, a, true);
    }
    return;
  }
  parallel_for(n, [&](std::size_t j) {
    for (std::size_t i = 0; i < n; ++i) fn(j, i, false);
  });
}

void check_h(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorKind::Validation, kModule, "bandwidth must be positive and finite");
}

}  // namespace

KernelSpec KernelSpec::make(int order) {
  if (order != 2 && order != 4 && order != 6)
    throw Error(ErrorKind::Configuration, kModule, "kernel order must be 2, 4 or 6");
  return KernelSpec{order};
}

double kernel_eval(const KernelSpec& spec, double u) noexcept {
  const double s = u * u;
  return poly(spec.order, s) * kInvSqrt2Pi * std::exp(-0.5 * s);
}

double kernel_l2_norm(const KernelSpec& spec) noexcept {
  const double base = 1.0 / (2.0 * std::sqrt(std::numbers::pi));
  switch (spec.order) {
    case 4: return base * 27.0 / 16.0;
    case 6: return base * 2.2119140625;
    default: return base;
  }
}

double product_kernel(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& zi,
                      const Eigen::Ref<const Eigen::VectorXd>& z, double h) {
  if (zi.size() != z.size()) throw Error(ErrorKind::Validation, kModule, "moderator dimensions disagree");
  double out = 1.0;
  for (Eigen::Index k = 0; k < z.size(); ++k) out *= kernel_eval(spec, (zi[k] - z[k]) / h);
  return out;
}

const char* to_string(BandwidthSource s) noexcept {
  switch (s) {
    case BandwidthSource::Loocv: return "loocv";
    case BandwidthSource::Manual: return "manual";
    case BandwidthSource::Rule: return "rule";
  }
  return "?";
}

Bandwidth Bandwidth::manual(double h) {
  check_h(h);
  return Bandwidth{h, 1.0, BandwidthSource::Manual, h};
}

Bandwidth Bandwidth::scaled(double multiple) const {
  check_h(multiple);
  Bandwidth b = *this;
  b.undersmooth_factor = multiple;
  b.h = raw * multiple;
  return b;
}

ZScaler ZScaler::fit(const Eigen::MatrixXd& z) {
  if (z.rows() < 2) throw Error(ErrorKind::Validation, kModule, "need at least two moderator rows");
  ZScaler s;
  s.mean = z.colwise().mean();
  s.sd.resize(z.cols());
  for (Eigen::Index k = 0; k < z.cols(); ++k) {
    const double ss = (z.col(k).array() - s.mean[k]).square().sum();
    s.sd[k] = std::sqrt(ss / static_cast<double>(z.rows() - 1));
    if (!(s.sd[k] > 1e-12 * std::max(1.0, std::abs(s.mean[k]))))
      throw Error(ErrorKind::Validation, kModule, "moderator " + std::to_string(k) + " has zero variance");
  }
  return s;
}

Eigen::MatrixXd ZScaler::apply(const Eigen::MatrixXd& z) const {
  return (z.rowwise() - mean).array().rowwise() / sd.array();
}

NwFit nw_regress(const Eigen::VectorXd& psi, const Eigen::MatrixXd& z, const Eigen::Ref<const Eigen::VectorXd>& query,
                 double h, const KernelSpec& spec) {
  check_h(h);
  if (psi.size() != z.rows()) throw Error(ErrorKind::Validation, kModule, "psi and moderator rows disagree");
  if (query.size() != z.cols()) throw Error(ErrorKind::Validation, kModule, "query dimension does not match moderators");
  const auto n = z.rows();
  const auto dims = static_cast<std::size_t>(z.cols());
  const double norm = std::pow(kInvSqrt2Pi, static_cast<double>(dims));
  std::vector<double> s(dims);
  NwFit fit;
  fit.weights.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < dims; ++k) {
      const double u = (z(i, static_cast<Eigen::Index>(k)) - query[static_cast<Eigen::Index>(k)]) / h;
      s[k] = u * u;
    }
    fit.weights[i] = product_from_squares(spec.order, s.data(), dims, norm);
  }
  fit.sum_k = fit.weights.sum();
  if (!(fit.sum_k >= kDensityFloor * static_cast<double>(n))) {
    std::string where;
    for (Eigen::Index k = 0; k < query.size(); ++k) where += (k ? "," : "") + std::to_string(query[k]);
    throw Error(ErrorKind::NoLocalData, kModule, "no local data at query (" + where + ")",
                "increase the bandwidth or restrict queries to the interior of the moderator support");
  }
  fit.estimate = fit.weights.dot(psi) / fit.sum_k;
  fit.weights /= fit.sum_k;
  fit.f_hat = fit.sum_k / (static_cast<double>(n) * std::pow(h, static_cast<double>(dims)));
  return fit;
}

ObservationSums observation_sums(const Eigen::VectorXd& psi, const Eigen::MatrixXd& z, double h,
                                 const KernelSpec& spec) {
  check_h(h);
  if (psi.size() != z.rows()) throw Error(ErrorKind::Validation, kModule, "psi and moderator rows disagree");
  const auto n = static_cast<std::size_t>(z.rows());
  const auto dims = static_cast<std::size_t>(z.cols());
  const double norm = std::pow(kInvSqrt2Pi, static_cast<double>(dims));
  const double inv_h = 1.0 / h;
  // Row-major copy for cache-friendly pair loops.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> zr = z * inv_h;
  ObservationSums out{Eigen::VectorXd::Zero(z.rows()), Eigen::VectorXd::Zero(z.rows())};
  for_each_pair(n, [&](std::size_t j, std::size_t i, bool symmetric) {
    thread_local std::vector<double> scratch;
    scratch.resize(dims);
    double* sp = scratch.data();
    const double* a = zr.data() + j * dims;
    const double* b = zr.data() + i * dims;
    for (std::size_t k = 0; k < dims; ++k) {
      const double u = b[k] - a[k];
      sp[k] = u * u;
    }
    const double kv = product_from_squares(spec.order, sp, dims, norm);
    const auto ej = static_cast<Eigen::Index>(j), ei = static_cast<Eigen::Index>(i);
    out.mass[ej] += kv;
    out.weighted[ej] += kv * psi[ei];
    if (symmetric) {
      out.mass[ei] += kv;
      out.weighted[ei] += kv * psi[ej];
    }
  });
  return out;
}

double kde(const Eigen::MatrixXd& z, const Eigen::Ref<const Eigen::VectorXd>& query, double h, const KernelSpec& spec) {
  check_h(h);
  if (query.size() != z.cols()) throw Error(ErrorKind::Validation, kModule, "query dimension does not match moderators");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) sum += product_kernel(spec, z.row(i).transpose(), query, h);
  return sum / (static_cast<double>(z.rows()) * std::pow(h, static_cast<double>(z.cols())));
}

std::vector<double> default_bandwidth_grid(std::size_t n, std::size_t dims, int points) {
  if (n < 1 || dims < 1 || points < 1) throw Error(ErrorKind::Validation, kModule, "bad bandwidth grid request");
  const double d = static_cast<double>(dims);
  const double rot = std::pow(4.0 / ((d + 2.0) * static_cast<double>(n)), 1.0 / (d + 4.0));
  std::vector<double> grid(static_cast<std::size_t>(points));
  const double lo = std::log(0.05 * rot), hi = std::log(2.0 * rot);
  for (int k = 0; k < points; ++k)
    grid[static_cast<std::size_t>(k)] = points == 1 ? 2.0 * rot : std::exp(lo + (hi - lo) * k / (points - 1));
  return grid;
}

LoocvResult loocv_bandwidth(const Eigen::VectorXd& psi, const Eigen::MatrixXd& z, const KernelSpec& spec,
                            std::vector<double> grid, double undersmooth_factor) {
  if (grid.empty()) throw Error(ErrorKind::Validation, kModule, "bandwidth grid is empty");
  for (double h : grid) check_h(h);
  if (!(undersmooth_factor > 0.0 && undersmooth_factor <= 1.0))
    throw Error(ErrorKind::Validation, kModule, "undersmooth factor must lie in (0, 1]");
  if (psi.size() != z.rows()) throw Error(ErrorKind::Validation, kModule, "psi and moderator rows disagree");
  const auto n = static_cast<std::size_t>(z.rows());
  if (n < 3) throw Error(ErrorKind::Validation, kModule, "leave-one-out selection needs at least three rows");
  std::sort(grid.begin(), grid.end());
  const std::size_t G = grid.size();
  const auto dims = static_cast<std::size_t>(z.cols());
  const double norm = std::pow(kInvSqrt2Pi, static_cast<double>(dims));
  std::vector<double> inv_h2(G);
  for (std::size_t g = 0; g < G; ++g) inv_h2[g] = 1.0 / (grid[g] * grid[g]);

  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> zr = z;
  // Off-diagonal sums only, laid out [row][grid].
  std::vector<double> mass(n * G, 0.0), weighted(n * G, 0.0);
  for_each_pair(n, [&](std::size_t j, std::size_t i, bool symmetric) {
    if (i == j) return;
    thread_local std::vector<double> scratch;
    scratch.resize(2 * dims);
    double* sp = scratch.data();
    double* sc = sp + dims;
    const double* a = zr.data() + j * dims;
    const double* b = zr.data() + i * dims;
    for (std::size_t k = 0; k < dims; ++k) {
      const double u = b[k] - a[k];
      sp[k] = u * u;
    }
    const double pj = psi[static_cast<Eigen::Index>(j)], pi = psi[static_cast<Eigen::Index>(i)];
    for (std::size_t g = 0; g < G; ++g) {
      for (std::size_t k = 0; k < dims; ++k) sc[k] = sp[k] * inv_h2[g];
      const double kv = product_from_squares(spec.order, sc, dims, norm);
      mass[j * G + g] += kv;
      weighted[j * G + g] += kv * pi;
      if (symmetric) {
        mass[i * G + g] += kv;
        weighted[i * G + g] += kv * pj;
      }
    }
  });

  const double total = psi.sum();
  const double floor = kDensityFloor * static_cast<double>(n - 1);
  LoocvResult res;
  res.grid = grid;
  res.criterion.assign(G, std::numeric_limits<double>::infinity());
  double best = std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t g = 0; g < G; ++g) {
    double crit = 0.0;
    std::size_t floored = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double psi_i = psi[static_cast<Eigen::Index>(i)];
      double pred;
      if (mass[i * G + g] >= floor) {
        pred = weighted[i * G + g] / mass[i * G + g];
      } else {
        pred = (total - psi_i) / static_cast<double>(n - 1);
        ++floored;
      }
      crit += (psi_i - pred) * (psi_i - pred);
    }
    if (!std::isfinite(crit) || floored == n) continue;
    res.criterion[g] = crit;
    any = true;
    if (crit < best) {
      best = crit;
      res.index = g;
    }
  }
  if (!any)
    throw Error(ErrorKind::BandwidthSelection, kModule, "every bandwidth on the grid is degenerate",
                "widen the bandwidth grid");
  res.bandwidth = Bandwidth{grid[res.index] * undersmooth_factor, undersmooth_factor, BandwidthSource::Loocv,
                            grid[res.index]};
  return res;
}

}  // namespace drgate

namespace drgate {

BandwidthConfig BandwidthConfig::from_json(const nlohmann::json& j) {
  BandwidthConfig c;
  try {
    const auto mode = j.value("mode", std::string("loocv"));
    if (mode == "loocv") c.mode = BandwidthMode::Loocv;
    else if (mode == "manual") c.mode = BandwidthMode::Manual;
    else if (mode == "rule") c.mode = BandwidthMode::Rule;
    else throw Error(ErrorKind::Configuration, "kernel", "bandwidth.mode must be loocv, manual or rule");
    c.value = j.value("value", c.value);
    c.scale = j.value("scale", c.scale);
    c.exponent = j.value("exponent", c.exponent);
    c.undersmooth_factor = j.value("undersmooth_factor", c.undersmooth_factor);
    if (j.contains("grid")) c.grid = j.at("grid").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Configuration, "kernel", std::string("bad bandwidth block: ") + e.what());
  }
  if (c.mode == BandwidthMode::Manual && !(c.value > 0.0))
    throw Error(ErrorKind::Configuration, "kernel", "manual bandwidth needs a positive value");
  if (c.mode == BandwidthMode::Rule && !(c.scale > 0.0 && c.exponent > 0.0))
    throw Error(ErrorKind::Configuration, "kernel", "rule bandwidth needs positive scale and exponent");
  if (!(c.undersmooth_factor > 0.0 && c.undersmooth_factor <= 1.0))
    throw Error(ErrorKind::Configuration, "kernel", "undersmooth_factor must lie in (0, 1]");
  return c;
}

nlohmann::json BandwidthConfig::to_json() const {
  nlohmann::json j;
  switch (mode) {
    case BandwidthMode::Loocv:
      j = {{"mode", "loocv"}, {"undersmooth_factor", undersmooth_factor}};
      if (!grid.empty()) j["grid"] = grid;
      break;
    case BandwidthMode::Manual: j = {{"mode", "manual"}, {"value", value}}; break;
    case BandwidthMode::Rule: j = {{"mode", "rule"}, {"scale", scale}, {"exponent", exponent}}; break;
  }
  return j;
}

Bandwidth select_bandwidth(const BandwidthConfig& cfg, const Eigen::VectorXd& psi, const Eigen::MatrixXd& z,
                           const KernelSpec& spec) {
  switch (cfg.mode) {
    case BandwidthMode::Manual: return Bandwidth::manual(cfg.value);
    case BandwidthMode::Rule: {
      const double h = cfg.scale * std::pow(static_cast<double>(z.rows()), -cfg.exponent);
      return Bandwidth{h, 1.0, BandwidthSource::Rule, h};
    }
    case BandwidthMode::Loocv: break;
  }
  const Eigen::MatrixXd zs = ZScaler::fit(z).apply(z);
  auto grid = cfg.grid.empty() ? default_bandwidth_grid(static_cast<std::size_t>(z.rows()), static_cast<std::size_t>(z.cols()))
                               : cfg.grid;
  return loocv_bandwidth(psi, zs, spec, std::move(grid), cfg.undersmooth_factor).bandwidth;
}

}  // namespace drgate
