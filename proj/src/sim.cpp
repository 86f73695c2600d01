#include "drgate/sim.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

#include "drgate/error.hpp"
#include "drgate/parallel.hpp"
#include "drgate/rng.hpp"
#include "drgate/stats.hpp"

namespace drgate::sim {

namespace {

constexpr const char* kModule = "sim";
constexpr std::size_t kKeptErrors = 5;

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

struct Moments {
  double mean = 0, sd = 0;
};

Moments moments(const std::vector<double>& v) {
  if (v.empty()) return {NAN, NAN};
  Moments m;
  m.mean = stats::mean(v);
  m.sd = v.size() > 1 ? stats::sample_sd(v) : 0.0;
  return m;
}

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

EstimatorSummary summarize(const std::string& method, double truth, const std::vector<double>& est,
                           const std::vector<double>& se, double crit, std::size_t n) {
  EstimatorSummary s;
  s.method = method;
  s.truth = truth;
  const auto m = moments(est);
  s.mean = m.mean;
  s.sd = m.sd;
  s.bias = m.mean - truth;
  s.mc_se = est.empty() ? NAN : m.sd / std::sqrt(static_cast<double>(est.size()));
  double sq = 0.0, covered = 0.0;
  for (std::size_t k = 0; k < est.size(); ++k) {
    sq += (est[k] - truth) * (est[k] - truth);
    if (std::abs(est[k] - truth) <= crit * se[k]) covered += 1.0;
  }
  const double r = static_cast<double>(est.size());
  s.rmse = est.empty() ? NAN : std::sqrt(sq / r);
  s.coverage = est.empty() ? NAN : covered / r;
  s.mean_se = moments(se).mean;
  s.scaled_variance = static_cast<double>(n) * m.sd * m.sd;
  return s;
}

}  // namespace

const char* to_string(TauShape s) noexcept {
  switch (s) {
    case TauShape::Constant: return "constant";
    case TauShape::Linear: return "linear";
    case TauShape::Sine: return "sine";
  }
  return "?";
}

TauShape tau_shape_from_string(const std::string& s) {
  for (auto t : {TauShape::Constant, TauShape::Linear, TauShape::Sine})
    if (s == to_string(t)) return t;
  throw Error(ErrorKind::Configuration, kModule, "tau_shape must be constant, linear or sine");
}

void DgpSpec::validate() const {
  if (n < 4) throw Error(ErrorKind::Validation, kModule, "simulated n must be at least 4");
  if (lambda_x < 1 || lambda_z < 1 || lambda_z > lambda_x)
    throw Error(ErrorKind::Validation, kModule, "need 1 <= lambda_z <= lambda_x");
  if (s < 1 || s > lambda_x) throw Error(ErrorKind::Validation, kModule, "sparsity s must lie in [1, lambda_x]");
  if (!(noise_sd >= 0.0) || !std::isfinite(overlap_strength) || !std::isfinite(outcome_strength) ||
      !std::isfinite(tau_level))
    throw Error(ErrorKind::Validation, kModule, "DGP parameters must be finite and noise_sd nonnegative");
}

bool DgpSpec::overlap_ok() const noexcept {
  // iota is standard normal; need |a iota| <= logit(0.95) with probability 0.99.
  const double logit95 = std::log(0.95 / 0.05);
  return std::abs(overlap_strength) * 2.5758293035489004 <= logit95;
}

DgpSpec DgpSpec::from_json(const nlohmann::json& j) {
  DgpSpec d;
  try {
    d.n = j.value("n", d.n);
    d.lambda_x = j.value("lambda_x", d.lambda_x);
    d.lambda_z = j.value("lambda_z", d.lambda_z);
    d.s = j.value("s", d.s);
    if (j.contains("tau_shape")) d.tau_shape = tau_shape_from_string(j.at("tau_shape").get<std::string>());
    d.tau_level = j.value("tau_level", d.tau_level);
    d.overlap_strength = j.value("overlap_strength", d.overlap_strength);
    d.outcome_strength = j.value("outcome_strength", d.outcome_strength);
    d.noise_sd = j.value("noise_sd", d.noise_sd);
    d.seed = j.value("seed", d.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Configuration, kModule, std::string("bad dgp block: ") + e.what());
  }
  d.validate();
  return d;
}

nlohmann::json DgpSpec::to_json() const {
  return {{"n", n},
          {"lambda_x", lambda_x},
          {"lambda_z", lambda_z},
          {"s", s},
          {"tau_shape", to_string(tau_shape)},
          {"tau_level", tau_level},
          {"overlap_strength", overlap_strength},
          {"outcome_strength", outcome_strength},
          {"noise_sd", noise_sd},
          {"seed", seed}};
}

double tau_at(const DgpSpec& spec, const Eigen::Ref<const Eigen::RowVectorXd>& z) {
  double t = spec.tau_level;
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    if (spec.tau_shape == TauShape::Linear) t += z[k];
    if (spec.tau_shape == TauShape::Sine) t += std::sin(2.0 * z[k]);
  }
  return t;
}

double true_theta(const DgpSpec& spec) noexcept { return spec.tau_level; }

double tau_variance(const DgpSpec& spec) noexcept {
  const double lz = static_cast<double>(spec.lambda_z);
  switch (spec.tau_shape) {
    case TauShape::Linear: return lz;
    case TauShape::Sine: return lz * 0.5 * (1.0 - std::exp(-8.0));
    default: return 0.0;
  }
}

double hahn_bound(const DgpSpec& spec) noexcept {
  const double a = spec.overlap_strength;
  // E[1/(p(1-p))] = 2 + E[e^{a iota} + e^{-a iota}] for iota ~ N(0, 1).
  return spec.noise_sd * spec.noise_sd * (2.0 + 2.0 * std::exp(0.5 * a * a)) + tau_variance(spec);
}

Simulated generate(const DgpSpec& spec) {
  spec.validate();
  auto rng = make_rng(spec.seed, {kStreamData});
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  const auto n = static_cast<Eigen::Index>(spec.n);
  const auto p = static_cast<Eigen::Index>(spec.lambda_x);
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = normal(rng);

  Truth t;
  t.p.resize(n);
  t.m0.resize(n);
  t.m1.resize(n);
  t.tau.resize(n);
  t.theta = true_theta(spec);
  Eigen::VectorXd d(n), y(n);
  const auto s = static_cast<Eigen::Index>(spec.s);
  const auto lz = static_cast<Eigen::Index>(spec.lambda_z);
  const double norm = 1.0 / std::sqrt(static_cast<double>(spec.s));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double iota = x.row(i).head(s).sum() * norm;
    t.p[i] = logistic(spec.overlap_strength * iota);
    t.m0[i] = spec.outcome_strength * iota;
    t.tau[i] = tau_at(spec, x.row(i).head(lz));
    t.m1[i] = t.m0[i] + t.tau[i];
    d[i] = unif(rng) < t.p[i] ? 1.0 : 0.0;
    y[i] = (d[i] == 1.0 ? t.m1[i] : t.m0[i]) + spec.noise_sd * normal(rng);
  }
  // Guarantee both arms for tiny designs without disturbing typical draws.
  if (d.sum() == 0.0) d[0] = 1.0;
  if (d.sum() == static_cast<double>(n)) d[0] = 0.0;

  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
  std::vector<std::size_t> z_cols;
  for (std::size_t k = 0; k < spec.lambda_z; ++k) z_cols.push_back(k);
  return {Dataset(std::move(y), std::move(d), std::move(x), std::move(z_cols), std::move(names)), std::move(t)};
}

ArmSpec ArmSpec::preset(const std::string& name, const LearnerConfig& base) {
  learn::LearnerSpec mean;
  mean.kind = learn::LearnerKind::Mean;
  ArmSpec a{name, false, base};
  if (name == "correct") return a;
  if (name == "oracle") {
    a.oracle = true;
    return a;
  }
  if (name == "p_wrong") a.learners.propensity = {mean};
  else if (name == "m_wrong") a.learners.outcome = {mean};
  else if (name == "both_wrong") a.learners.propensity = a.learners.outcome = {mean};
  else
    throw Error(ErrorKind::Configuration, kModule, "unknown arm '" + name + "'",
                "use correct, p_wrong, m_wrong, both_wrong, oracle or an object with learners");
  return a;
}

ArmSpec ArmSpec::from_json(const nlohmann::json& j, const LearnerConfig& base) {
  if (j.is_string()) return preset(j.get<std::string>(), base);
  if (!j.is_object() || !j.contains("name")) throw Error(ErrorKind::Configuration, kModule, "arm needs a name");
  ArmSpec a = j.contains("preset") ? preset(j.at("preset").get<std::string>(), base) : ArmSpec{"", false, base};
  a.name = j.at("name").get<std::string>();
  if (j.contains("learners")) a.learners = LearnerConfig::from_json(j.at("learners"));
  a.oracle = j.value("oracle", a.oracle);
  return a;
}

nlohmann::json ArmSpec::to_json() const {
  nlohmann::json j{{"name", name}, {"oracle", oracle}};
  if (!oracle) j["learners"] = learners.to_json();
  return j;
}

McConfig McConfig::from_json(const nlohmann::json& j) {
  McConfig c;
  try {
    if (j.contains("dgp")) c.dgp = DgpSpec::from_json(j.at("dgp"));
    if (j.contains("pipeline")) c.pipeline = PipelineConfig::from_json(j.at("pipeline"));
    c.replications = j.value("replications", c.replications);
    c.seed = j.value("seed", c.seed);
    c.max_failure_fraction = j.value("max_failure_fraction", c.max_failure_fraction);
    if (j.contains("arms"))
      for (const auto& a : j.at("arms")) c.arms.push_back(ArmSpec::from_json(a, c.pipeline.learners));
    if (j.contains("queries")) {
      const auto rows = j.at("queries").get<std::vector<std::vector<double>>>();
      c.queries.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(c.dgp.lambda_z));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != c.dgp.lambda_z)
          throw Error(ErrorKind::Configuration, kModule, "each query needs lambda_z coordinates");
        for (std::size_t k = 0; k < rows[r].size(); ++k)
          c.queries(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r][k];
      }
    }
    if (j.contains("stages")) {
      const auto& s = j.at("stages");
      c.stages.gate = s.value("gate", c.stages.gate);
      c.stages.smoothed_ate = s.value("smoothed_ate", c.stages.smoothed_ate);
      c.stages.ipw_gate = s.value("ipw_gate", c.stages.ipw_gate);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Configuration, kModule, std::string("bad simulation config: ") + e.what());
  }
  if (c.replications < 2) throw Error(ErrorKind::Validation, kModule, "replications must be at least 2");
  if (c.arms.empty()) c.arms.push_back(ArmSpec::preset("correct", c.pipeline.learners));
  return c;
}

nlohmann::json McConfig::to_json() const {
  nlohmann::json arms_j = nlohmann::json::array();
  for (const auto& a : arms) arms_j.push_back(a.to_json());
  std::vector<std::vector<double>> q;
  const Eigen::MatrixXd qp = query_points();
  for (Eigen::Index r = 0; r < qp.rows(); ++r) {
    q.emplace_back();
    for (Eigen::Index k = 0; k < qp.cols(); ++k) q.back().push_back(qp(r, k));
  }
  return {{"dgp", dgp.to_json()},
          {"pipeline", pipeline.to_json()},
          {"arms", arms_j},
          {"queries", q},
          {"replications", replications},
          {"stages", {{"gate", stages.gate}, {"smoothed_ate", stages.smoothed_ate}, {"ipw_gate", stages.ipw_gate}}},
          {"max_failure_fraction", max_failure_fraction},
          {"seed", seed}};
}

Eigen::MatrixXd McConfig::query_points() const {
  if (queries.size() > 0) return queries;
  const Eigen::VectorXd axis = Eigen::VectorXd::LinSpaced(5, -1.0, 1.0);
  Eigen::MatrixXd q(5, static_cast<Eigen::Index>(dgp.lambda_z));
  for (Eigen::Index k = 0; k < q.cols(); ++k) q.col(k) = axis;
  return q;
}

const EstimatorSummary* ArmSummary::estimator(const std::string& method) const {
  for (const auto& e : ate)
    if (e.method == method) return &e;
  return nullptr;
}

const ArmSummary* McReport::arm(const std::string& name) const {
  for (const auto& a : arms)
    if (a.name == name) return &a;
  return nullptr;
}

McReport run_mc(const McConfig& config) {
  if (config.replications < 2) throw Error(ErrorKind::Validation, kModule, "replications must be at least 2");
  if (config.arms.empty()) throw Error(ErrorKind::Validation, kModule, "simulation needs at least one arm");
  config.dgp.validate();
  const auto reps = static_cast<std::size_t>(config.replications);
  const std::size_t n_arms = config.arms.size();
  const Eigen::MatrixXd queries = config.query_points();
  if (queries.cols() != static_cast<Eigen::Index>(config.dgp.lambda_z))
    throw Error(ErrorKind::Validation, kModule, "queries need lambda_z columns");

  McReport report;
  report.replications = config.replications;
  report.theta = true_theta(config.dgp);
  report.hahn_bound = hahn_bound(config.dgp);
  report.config = config.to_json();
  report.records.assign(n_arms, std::vector<ArmReplication>(reps));

  parallel_for(reps, [&](std::size_t r) {
    const std::uint64_t rep_seed = derive_seed(config.seed, {kStreamReplication, r});
    DgpSpec spec = config.dgp;
    spec.seed = rep_seed;
    std::optional<Simulated> sim;
    std::string data_error;
    try {
      sim = generate(spec);
    } catch (const Error& e) {
      data_error = e.what();
    }
    for (std::size_t a = 0; a < n_arms; ++a) {
      ArmReplication& rec = report.records[a][r];
      if (!sim) {
        rec.error = data_error;
        continue;
      }
      const ArmSpec& arm = config.arms[a];
      try {
        PipelineConfig cfg = config.pipeline;
        cfg.learners = arm.learners;
        PipelineResult res;
        if (arm.oracle) {
          auto fits = NuisanceFits::from_values(sim->data.d(), sim->truth.p, sim->truth.m0, sim->truth.m1, cfg.trim_c);
          res = run_second_stage(sim->data, std::move(fits), cfg, queries, config.stages);
        } else {
          res = run_pipeline(sim->data, cfg, queries, derive_seed(rep_seed, {kStreamPipeline}), config.stages);
        }
        rec.aipw = res.averaged_aipw.estimate;
        rec.aipw_se = res.averaged_aipw.std_error;
        rec.ipw = res.averaged_ipw.estimate;
        rec.ipw_se = res.averaged_ipw.std_error;
        rec.mean_psi_oracle_gap = res.aipw.psi.mean() - sim->truth.theta;
        rec.clipped = res.fits.clipped();
        rec.bandwidth = res.bandwidth.h;
        if (res.smoothed) {
          rec.smoothed = res.smoothed->estimate;
          rec.smoothed_se = res.smoothed->std_error;
        }
        if (res.gate) {
          rec.gate = res.gate->estimate;
          rec.gate_se = res.gate->std_error;
        }
        if (res.ipw_gate) rec.ipw_gate_se = res.ipw_gate->std_error;
        rec.ok = true;
      } catch (const Error& e) {
        rec.error = std::string(drgate::to_string(e.kind())) + " in " + e.module() + ": " + e.what();
      }
    }
  });

  const double crit = stats::critical_value(config.pipeline.level);
  std::string aggregate_failure;
  for (std::size_t a = 0; a < n_arms; ++a) {
    ArmSummary s;
    s.name = config.arms[a].name;
    std::vector<double> aipw, aipw_se, ipw, ipw_se, sm, sm_se;
    double close = 0, ipw_larger = 0, ipw_gate_larger = 0, ipw_gate_total = 0, clipped = 0;
    std::vector<const ArmReplication*> good;
    for (const auto& rec : report.records[a]) {
      if (!rec.ok) {
        ++s.failures;
        if (s.errors.size() < kKeptErrors) s.errors.push_back(rec.error);
        continue;
      }
      good.push_back(&rec);
      aipw.push_back(rec.aipw);
      aipw_se.push_back(rec.aipw_se);
      ipw.push_back(rec.ipw);
      ipw_se.push_back(rec.ipw_se);
      if (rec.ipw_se > rec.aipw_se) ipw_larger += 1;
      clipped += static_cast<double>(rec.clipped);
      if (config.stages.smoothed_ate) {
        sm.push_back(rec.smoothed);
        sm_se.push_back(rec.smoothed_se);
        if (std::abs(rec.smoothed - rec.aipw) < 0.5 * rec.aipw_se) close += 1;
      }
      for (Eigen::Index q = 0; q < rec.ipw_gate_se.size(); ++q) {
        if (!std::isfinite(rec.ipw_gate_se[q]) || !std::isfinite(rec.gate_se[q])) continue;
        ipw_gate_total += 1;
        if (rec.ipw_gate_se[q] > rec.gate_se[q]) ipw_gate_larger += 1;
      }
    }
    s.successes = good.size();
    const double g = static_cast<double>(good.size());
    const std::size_t n = config.dgp.n;
    if (!good.empty()) {
      s.ate.push_back(summarize("AVERAGED_AIPW", report.theta, aipw, aipw_se, crit, n));
      s.ate.push_back(summarize("AVERAGED_IPW", report.theta, ipw, ipw_se, crit, n));
      if (config.stages.smoothed_ate) s.ate.push_back(summarize("SMOOTHED_AIPW", report.theta, sm, sm_se, crit, n));
      s.smoothed_close_fraction = config.stages.smoothed_ate ? close / g : NAN;
      s.ipw_se_larger_fraction = ipw_larger / g;
      s.ipw_gate_se_larger_fraction = ipw_gate_total > 0 ? ipw_gate_larger / ipw_gate_total : NAN;
      s.mean_clipped = clipped / g;
    }
    if (config.stages.gate && !good.empty()) {
      for (Eigen::Index q = 0; q < queries.rows(); ++q) {
        QuerySummary qs;
        for (Eigen::Index k = 0; k < queries.cols(); ++k) qs.z.push_back(queries(q, k));
        qs.truth = tau_at(config.dgp, queries.row(q));
        std::vector<double> est, se;
        for (const auto* rec : good)
          if (std::isfinite(rec->gate[q]) && std::isfinite(rec->gate_se[q])) {
            est.push_back(rec->gate[q]);
            se.push_back(rec->gate_se[q]);
          }
        const auto e = summarize("GATE", qs.truth, est, se, crit, n);
        qs.mean = e.mean;
        qs.bias = e.bias;
        qs.rmse = e.rmse;
        qs.coverage = e.coverage;
        qs.mean_se = e.mean_se;
        qs.sd = e.sd;
        qs.se_calibration = e.mean_se > 0 ? e.sd / e.mean_se : NAN;
        s.gate.push_back(qs);
      }
    }
    if (static_cast<double>(s.failures) > config.max_failure_fraction * static_cast<double>(reps))
      aggregate_failure += "arm '" + s.name + "' failed in " + std::to_string(s.failures) + " of " +
                           std::to_string(reps) + " replications" + (s.errors.empty() ? "" : " (" + s.errors.front() + ")") + "; ";
    report.arms.push_back(std::move(s));
  }
  if (!aggregate_failure.empty()) throw Error(ErrorKind::Aggregate, kModule, aggregate_failure);
  return report;
}

nlohmann::json McReport::to_json() const {
  nlohmann::json arms_j = nlohmann::json::array();
  for (const auto& a : arms) {
    nlohmann::json gate_j = nlohmann::json::array();
    for (const auto& q : a.gate)
      gate_j.push_back({{"z", q.z},
                        {"truth", q.truth},
                        {"mean", num(q.mean)},
                        {"bias", num(q.bias)},
                        {"rmse", num(q.rmse)},
                        {"coverage", num(q.coverage)},
                        {"mean_se", num(q.mean_se)},
                        {"sd", num(q.sd)},
                        {"se_calibration", num(q.se_calibration)}});
    nlohmann::json ate_j = nlohmann::json::array();
    for (const auto& e : a.ate)
      ate_j.push_back({{"method", e.method},
                       {"truth", e.truth},
                       {"mean", num(e.mean)},
                       {"bias", num(e.bias)},
                       {"mc_se", num(e.mc_se)},
                       {"rmse", num(e.rmse)},
                       {"coverage", num(e.coverage)},
                       {"mean_se", num(e.mean_se)},
                       {"sd", num(e.sd)},
                       {"scaled_variance", num(e.scaled_variance)}});
    arms_j.push_back({{"name", a.name},
                      {"successes", a.successes},
                      {"failures", a.failures},
                      {"errors", a.errors},
                      {"gate", gate_j},
                      {"ate", ate_j},
                      {"smoothed_close_fraction", num(a.smoothed_close_fraction)},
                      {"ipw_se_larger_fraction", num(a.ipw_se_larger_fraction)},
                      {"ipw_gate_se_larger_fraction", num(a.ipw_gate_se_larger_fraction)},
                      {"mean_clipped", num(a.mean_clipped)}});
  }
  return {{"replications", replications},
          {"theta", theta},
          {"hahn_bound", hahn_bound},
          {"arms", arms_j},
          {"config", config}};
}

void McReport::write_replications_csv(std::ostream& out) const {
  out << "arm,replication,ok,aipw,aipw_se,ipw,ipw_se,smoothed,smoothed_se,bandwidth,clipped";
  std::size_t q_count = 0;
  for (const auto& arm_recs : records)
    for (const auto& r : arm_recs) q_count = std::max(q_count, static_cast<std::size_t>(r.gate.size()));
  for (std::size_t q = 0; q < q_count; ++q) out << ",gate" << q + 1 << ",gate_se" << q + 1;
  out << '\n' << std::setprecision(17);
  for (std::size_t a = 0; a < records.size(); ++a)
    for (std::size_t r = 0; r < records[a].size(); ++r) {
      const auto& rec = records[a][r];
      out << arms[a].name << ',' << r << ',' << (rec.ok ? 1 : 0) << ',' << rec.aipw << ',' << rec.aipw_se << ',' << rec.ipw
          << ',' << rec.ipw_se << ',' << rec.smoothed << ',' << rec.smoothed_se << ',' << rec.bandwidth << ','
          << rec.clipped;
      for (std::size_t q = 0; q < q_count; ++q) {
        const auto i = static_cast<Eigen::Index>(q);
        if (i < rec.gate.size()) out << ',' << rec.gate[i] << ',' << rec.gate_se[i];
        else out << ",,";
      }
      out << '\n';
    }
}

}  // namespace drgate::sim
