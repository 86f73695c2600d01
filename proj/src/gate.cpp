#include "drgate/gate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "drgate/error.hpp"
#include "drgate/parallel.hpp"
#include "drgate/stats.hpp"

namespace drgate {

namespace {

constexpr const char* kModule = "gate";

struct QuantileBox {
  Eigen::RowVectorXd lo, hi;
};

QuantileBox quantile_box(const Eigen::MatrixXd& z) {
  QuantileBox box{Eigen::RowVectorXd(z.cols()), Eigen::RowVectorXd(z.cols())};
  for (Eigen::Index k = 0; k < z.cols(); ++k) {
    const Eigen::VectorXd col = z.col(k);
    box.lo[k] = stats::quantile(stats::view(col), 0.05);
    box.hi[k] = stats::quantile(stats::view(col), 0.95);
  }
  return box;
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

std::string describe_flags(unsigned flags) {
  std::string out;
  auto add = [&](unsigned bit, const char* name) {
    if (flags & bit) out += (out.empty() ? "" : "|") + std::string(name);
  };
  add(kGateUndefined, "undefined");
  add(kGateOutsideBox, "outside_box");
  add(kGateDegenerateSe, "degenerate_se");
  add(kGateNegativeVariance, "negative_variance");
  return out;
}

GateCurve estimate_gate(const ScoreVector& psi, const Eigen::MatrixXd& z, const Eigen::MatrixXd& queries,
                        const Bandwidth& bw, const KernelSpec& spec, double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::Validation, kModule, "level must lie in (0, 1)");
  if (static_cast<Eigen::Index>(psi.size()) != z.rows())
    throw Error(ErrorKind::Validation, kModule, "score length does not match the moderator rows");
  if (queries.cols() != z.cols()) throw Error(ErrorKind::Validation, kModule, "query dimension does not match moderators");
  if (!(bw.h > 0.0)) throw Error(ErrorKind::Validation, kModule, "bandwidth must be positive");

  const auto scaler = ZScaler::fit(z);
  const Eigen::MatrixXd zs = scaler.apply(z);
  const Eigen::MatrixXd qs = scaler.apply(queries);
  const auto box = quantile_box(z);
  const double dims = static_cast<double>(z.cols());
  const double l2 = std::pow(kernel_l2_norm(spec), dims);
  const double k0 = std::pow(kernel_eval(spec, 0.0), dims);
  const double crit = stats::critical_value(level);

  const auto m = queries.rows();
  GateCurve c;
  c.queries = queries;
  c.estimate = Eigen::VectorXd::Constant(m, nan());
  c.std_error = c.estimate;
  c.ci_lower = c.estimate;
  c.ci_upper = c.estimate;
  c.n_effective = Eigen::VectorXd::Zero(m);
  c.f_hat = Eigen::VectorXd::Zero(m);
  c.flags.assign(static_cast<std::size_t>(m), kGateOk);
  c.bandwidth = bw;
  c.kernel = spec;
  c.variant = psi.variant;
  c.level = level;

  parallel_for(static_cast<std::size_t>(m), [&](std::size_t qi) {
    const auto q = static_cast<Eigen::Index>(qi);
    unsigned& flags = c.flags[qi];
    if ((queries.row(q).array() < box.lo.array()).any() || (queries.row(q).array() > box.hi.array()).any())
      flags |= kGateOutsideBox;
    NwFit fit;
    try {
      fit = nw_regress(psi.psi, zs, qs.row(q).transpose(), bw.h, spec);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NoLocalData) throw;
      flags |= kGateUndefined;
      return;
    }
    const double tau = fit.estimate;
    double local_var = fit.weights.dot((psi.psi.array() - tau).square().matrix());
    if (local_var < 0.0) {
      local_var = 0.0;
      flags |= kGateNegativeVariance;
    }
    // sigma^2 / (N h^d) with f_hat = sum K / (N h^d) collapses to l2 * var / sum K.
    const double se = std::sqrt(l2 * local_var / fit.sum_k);
    if (se == 0.0) flags |= kGateDegenerateSe;
    c.estimate[q] = tau;
    c.std_error[q] = se;
    c.ci_lower[q] = tau - crit * se;
    c.ci_upper[q] = tau + crit * se;
    c.n_effective[q] = fit.sum_k / k0;
    c.f_hat[q] = fit.f_hat;
  });
  return c;
}

GateCurve estimate_gate(const ScoreVector& psi, const Dataset& ds, const Eigen::MatrixXd& queries, const Bandwidth& bw,
                        const KernelSpec& spec, double level) {
  auto c = estimate_gate(psi, ds.z(), queries, bw, spec, level);
  c.moderator_names = ds.z_names();
  return c;
}

Eigen::MatrixXd default_query_grid(const Eigen::MatrixXd& z, std::size_t n_points) {
  if (n_points < 2) throw Error(ErrorKind::Validation, kModule, "query grid needs at least two points");
  if (z.cols() < 1 || z.rows() < 2) throw Error(ErrorKind::Validation, kModule, "query grid needs moderator data");
  for (Eigen::Index k = 0; k < z.cols(); ++k)
    if ((z.col(k).array() == z(0, k)).all())
      throw Error(ErrorKind::Validation, kModule, "moderator " + std::to_string(k) + " has zero variance");
  const auto box = quantile_box(z);
  const auto n = static_cast<Eigen::Index>(n_points);
  auto axis = [&](Eigen::Index k) {
    return Eigen::VectorXd::LinSpaced(n, box.lo[k], box.hi[k]);
  };
  if (z.cols() == 1) return axis(0);
  if (z.cols() == 2) {
    const Eigen::VectorXd a = axis(0), b = axis(1);
    Eigen::MatrixXd q(n * n, 2);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) q.row(i * n + j) << a[i], b[j];
    return q;
  }
  // Rows inside the box, ordered by the first moderator, picked evenly.
  std::vector<Eigen::Index> inside;
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    if ((z.row(i).array() >= box.lo.array()).all() && (z.row(i).array() <= box.hi.array()).all()) inside.push_back(i);
  if (inside.empty()) throw Error(ErrorKind::Validation, kModule, "no observation lies inside the moderator quantile box");
  std::stable_sort(inside.begin(), inside.end(), [&](Eigen::Index a, Eigen::Index b) { return z(a, 0) < z(b, 0); });
  const auto take = std::min<std::size_t>(n_points, inside.size());
  Eigen::MatrixXd q(static_cast<Eigen::Index>(take), z.cols());
  for (std::size_t k = 0; k < take; ++k) {
    const std::size_t pos = take == 1 ? 0 : k * (inside.size() - 1) / (take - 1);
    q.row(static_cast<Eigen::Index>(k)) = z.row(inside[pos]);
  }
  return q;
}

Eigen::MatrixXd default_query_grid(const Dataset& ds, std::size_t n_points) { return default_query_grid(ds.z(), n_points); }

nlohmann::json GateCurve::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    std::vector<double> z;
    for (Eigen::Index k = 0; k < queries.cols(); ++k) z.push_back(queries(q, k));
    rows.push_back({{"z", z},
                    {"estimate", num(estimate[q])},
                    {"se", num(std_error[q])},
                    {"ci_lower", num(ci_lower[q])},
                    {"ci_upper", num(ci_upper[q])},
                    {"n_effective", n_effective[q]},
                    {"flags", describe_flags(flags[static_cast<std::size_t>(q)])}});
  }
  return {{"moderators", moderator_names},
          {"kernel_order", kernel.order},
          {"bandwidth",
           {{"h", bandwidth.h},
            {"raw", bandwidth.raw},
            {"undersmooth_factor", bandwidth.undersmooth_factor},
            {"source", to_string(bandwidth.source)}}},
          {"score", to_string(variant)},
          {"level", level},
          {"points", rows}};
}

void GateCurve::write_csv(std::ostream& out) const {
  std::vector<std::string> names = moderator_names;
  for (auto k = static_cast<Eigen::Index>(names.size()); k < queries.cols(); ++k) names.push_back("z" + std::to_string(k + 1));
  for (const auto& n : names) out << n << ',';
  out << "estimate,se,ci_lower,ci_upper,n_effective,flags\n" << std::setprecision(17);
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    for (Eigen::Index k = 0; k < queries.cols(); ++k) out << queries(q, k) << ',';
    out << estimate[q] << ',' << std_error[q] << ',' << ci_lower[q] << ',' << ci_upper[q] << ',' << n_effective[q] << ','
        << describe_flags(flags[static_cast<std::size_t>(q)]) << '\n';
  }
}

}  // namespace drgate
