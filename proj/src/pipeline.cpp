#include "drgate/pipeline.hpp"

#include "drgate/error.hpp"
#include "drgate/rng.hpp"

namespace drgate {

namespace {
constexpr const char* kModule = "pipeline";
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  PipelineConfig c;
  try {
    if (j.contains("learners")) c.learners = LearnerConfig::from_json(j.at("learners"));
    c.folds = j.value("folds", c.folds);
    c.stratify = j.value("stratify", c.stratify);
    c.trim_c = j.value("trim_c", c.trim_c);
    c.kernel = KernelSpec::make(j.value("kernel_order", 2));
    if (j.contains("bandwidth")) c.bandwidth = BandwidthConfig::from_json(j.at("bandwidth"));
    c.level = j.value("level", c.level);
    if (j.contains("score")) c.score = score_variant_from_string(j.at("score").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Configuration, kModule, std::string("bad pipeline settings: ") + e.what());
  }
  if (c.folds < 2) throw Error(ErrorKind::Configuration, kModule, "folds must be at least 2");
  if (!(c.trim_c > 0.0 && c.trim_c < 0.5)) throw Error(ErrorKind::Configuration, kModule, "trim_c must lie in (0, 0.5)");
  if (!(c.level > 0.0 && c.level < 1.0)) throw Error(ErrorKind::Configuration, kModule, "level must lie in (0, 1)");
  return c;
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"learners", learners.to_json()},
          {"folds", folds},
          {"stratify", stratify},
          {"trim_c", trim_c},
          {"kernel_order", kernel.order},
          {"bandwidth", bandwidth.to_json()},
          {"level", level},
          {"score", to_string(score)}};
}

FoldPlan make_plan(const Dataset& ds, const PipelineConfig& cfg, std::uint64_t seed) {
  const auto s = derive_seed(seed, {kStreamFolds});
  return cfg.stratify ? make_stratified_folds(ds.d(), cfg.folds, s) : make_folds(ds.n(), cfg.folds, s);
}

PipelineResult run_second_stage(const Dataset& ds, NuisanceFits fits, const PipelineConfig& cfg,
                                const Eigen::MatrixXd& queries, const StageOptions& opts) {
  PipelineResult r;
  r.aipw = aipw_score(ds, fits);
  r.ipw = ipw_score(ds, fits);
  r.psi = cfg.score == ScoreVariant::Aipw  ? r.aipw
          : cfg.score == ScoreVariant::Ipw ? r.ipw
                                           : outcome_score(ds, fits);
  r.fits = std::move(fits);
  r.averaged_aipw = averaged_ate(r.aipw, cfg.level);
  r.averaged_ipw = averaged_ate(r.ipw, cfg.level);
  if (!opts.gate && !opts.smoothed_ate) return r;

  const Eigen::MatrixXd z = ds.z();
  r.bandwidth = select_bandwidth(cfg.bandwidth, r.psi.psi, z, cfg.kernel);
  if (opts.gate) {
    r.gate = estimate_gate(r.psi, ds, queries, r.bandwidth, cfg.kernel, cfg.level);
    if (opts.ipw_gate) r.ipw_gate = estimate_gate(r.ipw, ds, queries, r.bandwidth, cfg.kernel, cfg.level);
  }
  if (opts.smoothed_ate) r.smoothed = smoothed_ate(r.psi, ds, r.bandwidth, cfg.kernel, cfg.level);
  return r;
}

PipelineResult run_pipeline(const Dataset& ds, const PipelineConfig& cfg, const Eigen::MatrixXd& queries,
                            std::uint64_t seed, const StageOptions& opts) {
  const auto plan = make_plan(ds, cfg, seed);
  auto fits = cross_fit(ds, plan, cfg.learners, cfg.trim_c, derive_seed(seed, {kStreamPipeline}));
  return run_second_stage(ds, std::move(fits), cfg, queries, opts);
}

}  // namespace drgate
