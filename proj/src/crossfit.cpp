#include "drgate/crossfit.hpp"

#include <algorithm>

#include "drgate/error.hpp"
#include "drgate/parallel.hpp"
#include "drgate/rng.hpp"
#include "drgate/stats.hpp"

namespace drgate {

namespace {

constexpr const char* kModule = "crossfit";
constexpr double kOverlapWarningFraction = 0.05;

learn::LearnerSpec spec_of(learn::LearnerKind kind) {
  learn::LearnerSpec s;
  s.kind = kind;
  return s;
}

learn::LearnerSpec forest_spec(learn::LearnerKind kind) {
  auto s = spec_of(kind);
  s.base_features_only = true;
  return s;
}

std::vector<learn::LearnerSpec> specs_from_json(const nlohmann::json& j, const char* key) {
  std::vector<learn::LearnerSpec> out;
  if (!j.contains(key)) return out;
  const auto& arr = j.at(key);
  if (!arr.is_array() || arr.empty())
    throw Error(ErrorKind::Configuration, kModule, std::string("learners.") + key + " must be a non-empty array");
  for (const auto& e : arr) out.push_back(learn::LearnerSpec::from_json(e));
  return out;
}

struct FoldResult {
  std::vector<std::size_t> rows;
  Eigen::VectorXd p, m0, m1;
  std::vector<FitRecord> log;
};

FitRecord record(int fold, NuisanceRole role, std::vector<std::size_t> rows, const learn::EnsembleModel& model) {
  FitRecord r{fold, role, std::move(rows), model.names(), {}};
  r.weights.assign(model.weights().data(), model.weights().data() + model.weights().size());
  return r;
}

}  // namespace

const char* to_string(NuisanceRole role) noexcept {
  switch (role) {
    case NuisanceRole::Propensity: return "propensity";
    case NuisanceRole::Outcome0: return "outcome0";
    case NuisanceRole::Outcome1: return "outcome1";
  }
  return "?";
}

LearnerConfig LearnerConfig::ensemble_default() {
  using learn::LearnerKind;
  LearnerConfig c;
  c.propensity = {spec_of(LearnerKind::LogitLasso), spec_of(LearnerKind::LogitElasticNet),
                  spec_of(LearnerKind::LogitRidge), forest_spec(LearnerKind::ProbabilityForest)};
  c.outcome = {spec_of(LearnerKind::Lasso), spec_of(LearnerKind::ElasticNet), spec_of(LearnerKind::Ridge),
               forest_spec(LearnerKind::Forest)};
  return c;
}

LearnerConfig LearnerConfig::parametric() {
  LearnerConfig c;
  c.propensity = {spec_of(learn::LearnerKind::Logit)};
  c.outcome = {spec_of(learn::LearnerKind::Ols)};
  return c;
}

LearnerConfig LearnerConfig::from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "ensemble") return ensemble_default();
    if (name == "parametric") return parametric();
    throw Error(ErrorKind::Configuration, kModule, "unknown learner preset '" + name + "'",
                "use \"ensemble\", \"parametric\" or an object with propensity/outcome member lists");
  }
  LearnerConfig c = ensemble_default();
  if (j.contains("preset")) c = from_json(j.at("preset"));
  if (auto p = specs_from_json(j, "propensity"); !p.empty()) c.propensity = std::move(p);
  if (auto m = specs_from_json(j, "outcome"); !m.empty()) c.outcome = std::move(m);
  c.cv_folds = j.value("cv_folds", c.cv_folds);
  if (c.cv_folds < 2) throw Error(ErrorKind::Configuration, kModule, "learners.cv_folds must be at least 2");
  return c;
}

nlohmann::json LearnerConfig::to_json() const {
  nlohmann::json j{{"cv_folds", cv_folds}, {"propensity", nlohmann::json::array()}, {"outcome", nlohmann::json::array()}};
  for (const auto& s : propensity) j["propensity"].push_back(s.to_json());
  for (const auto& s : outcome) j["outcome"].push_back(s.to_json());
  return j;
}

NuisanceFits NuisanceFits::from_values(const Eigen::VectorXd& d, Eigen::VectorXd p, Eigen::VectorXd m0,
                                       Eigen::VectorXd m1, double trim_c) {
  if (!(trim_c > 0.0 && trim_c < 0.5)) throw Error(ErrorKind::Validation, kModule, "trim_c must lie in (0, 0.5)");
  if (p.size() != d.size() || m0.size() != d.size() || m1.size() != d.size())
    throw Error(ErrorKind::Validation, kModule, "nuisance vectors must have one entry per row");
  NuisanceFits f;
  f.trim_c = trim_c;
  f.p_raw = p;
  f.p_hat = std::move(p);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    double& v = f.p_hat[i];
    if (!std::isfinite(v)) throw Error(ErrorKind::Numerical, kModule, "non-finite propensity prediction");
    if (v < trim_c || v > 1.0 - trim_c) {
      v = std::clamp(v, trim_c, 1.0 - trim_c);
      (d[i] == 1.0 ? f.clipped_treated : f.clipped_control)++;
    }
  }
  f.m0_hat = std::move(m0);
  f.m1_hat = std::move(m1);
  return f;
}

NuisanceFits cross_fit(const Dataset& ds, const FoldPlan& plan, const LearnerConfig& config, double trim_c,
                       std::uint64_t seed) {
  if (plan.size() != ds.n()) throw Error(ErrorKind::Validation, kModule, "fold plan does not cover the dataset");
  if (config.propensity.empty() || config.outcome.empty())
    throw Error(ErrorKind::Configuration, kModule, "learner config needs propensity and outcome members");
  if (!(trim_c > 0.0 && trim_c < 0.5)) throw Error(ErrorKind::Validation, kModule, "trim_c must lie in (0, 0.5)");

  const auto& x = ds.x();
  const auto& d = ds.d();
  const auto& y = ds.y();

  // Check every complement before fitting anything.
  for (int l = 1; l <= plan.folds; ++l) {
    std::size_t treated = 0, control = 0;
    for (std::size_t i = 0; i < plan.size(); ++i)
      if (plan.assignments[i] != l) (d[static_cast<Eigen::Index>(i)] == 1.0 ? treated : control)++;
    if (treated == 0 || control == 0)
      throw Error(ErrorKind::Stratification, kModule,
                  "the complement of fold " + std::to_string(l) + " has no " + (treated == 0 ? "treated" : "untreated") + " rows",
                  "use stratified folds or fewer folds");
  }

  auto build = [&](const std::vector<learn::LearnerSpec>& specs) {
    std::vector<learn::LearnerPtr> out;
    for (const auto& s : specs) out.push_back(learn::make_learner(s, ds.base_columns()));
    return out;
  };
  const auto p_learners = build(config.propensity);
  const auto m_learners = build(config.outcome);

  std::vector<FoldResult> results(static_cast<std::size_t>(plan.folds));
  parallel_for(results.size(), [&](std::size_t k) {
    const int l = static_cast<int>(k) + 1;
    const auto fold = static_cast<std::uint64_t>(l);
    const auto train = plan.rows_outside(l);
    FoldResult& res = results[k];
    res.rows = plan.rows_in(l);
    const Eigen::MatrixXd xtest = select_rows(x, res.rows);

    const Eigen::MatrixXd xtrain = select_rows(x, train);
    const auto p_model = learn::fit_ensemble(xtrain, select_rows(d, train), p_learners, config.cv_folds,
                                             derive_seed(seed, {kStreamPropensity, fold}));
    res.p = p_model.predict(xtest);
    res.log.push_back(record(l, NuisanceRole::Propensity, train, p_model));

    for (int arm = 0; arm <= 1; ++arm) {
      std::vector<std::size_t> arm_rows;
      for (auto i : train)
        if (d[static_cast<Eigen::Index>(i)] == static_cast<double>(arm)) arm_rows.push_back(i);
      const auto role = arm == 0 ? NuisanceRole::Outcome0 : NuisanceRole::Outcome1;
      const auto stream = arm == 0 ? kStreamOutcome0 : kStreamOutcome1;
      const auto model = learn::fit_ensemble(select_rows(x, arm_rows), select_rows(y, arm_rows), m_learners,
                                             config.cv_folds, derive_seed(seed, {stream, fold}));
      (arm == 0 ? res.m0 : res.m1) = model.predict(xtest);
      res.log.push_back(record(l, role, std::move(arm_rows), model));
    }
  });

  const auto n = static_cast<Eigen::Index>(ds.n());
  Eigen::VectorXd p(n), m0(n), m1(n);
  std::vector<FitRecord> log;
  for (auto& res : results) {
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(res.rows[i]);
      const auto k = static_cast<Eigen::Index>(i);
      p[row] = res.p[k];
      m0[row] = res.m0[k];
      m1[row] = res.m1[k];
    }
    for (auto& r : res.log) log.push_back(std::move(r));
  }
  auto fits = NuisanceFits::from_values(d, std::move(p), std::move(m0), std::move(m1), trim_c);
  fits.fold_plan = plan;
  fits.log = std::move(log);
  return fits;
}

nlohmann::json SupportReport::to_json() const {
  return {{"min", min},
          {"max", max},
          {"deciles", deciles},
          {"n", n},
          {"clipped_treated", clipped_treated},
          {"clipped_control", clipped_control},
          {"clip_fraction", clip_fraction},
          {"overlap_warning", overlap_warning}};
}

SupportReport support_report(const NuisanceFits& fits) {
  SupportReport r;
  const auto v = stats::view(fits.p_hat);
  r.n = v.size();
  if (r.n == 0) return r;
  r.min = *std::min_element(v.begin(), v.end());
  r.max = *std::max_element(v.begin(), v.end());
  for (int k = 1; k <= 9; ++k) r.deciles.push_back(stats::quantile(v, k / 10.0));
  r.clipped_treated = fits.clipped_treated;
  r.clipped_control = fits.clipped_control;
  r.clip_fraction = static_cast<double>(fits.clipped()) / static_cast<double>(r.n);
  r.overlap_warning = r.clip_fraction > kOverlapWarningFraction;
  return r;
}

}  // namespace drgate
