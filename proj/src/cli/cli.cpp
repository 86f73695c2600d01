#include "drgate/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "drgate/error.hpp"
#include "drgate/parallel.hpp"
#include "drgate/schema.hpp"
#include "drgate/theory.hpp"
#include "schema_text.hpp"

namespace drgate::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kModule = "cli";

[[noreturn]] void fail(ErrorKind kind, const std::string& msg, std::string hint = {}) {
  throw Error(kind, kModule, msg, std::move(hint));
}

std::string format_number(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

/// Output files are written with '\n' line ends regardless of platform.
void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Resource, "cannot write " + path.string(), "check --out-dir permissions");
  f << text;
  if (!text.empty() && text.back() != '\n') f << '\n';
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2)); }

Eigen::MatrixXd matrix_from_rows(const std::vector<std::vector<double>>& rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) fail(ErrorKind::Configuration, "query rows differ in length");
    for (std::size_t k = 0; k < rows[r].size(); ++k)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r][k];
  }
  return m;
}

std::vector<std::size_t> moderator_indices(const Dataset& ds, const std::vector<std::string>& names) {
  std::vector<std::size_t> idx;
  for (const auto& n : names) idx.push_back(ds.column_index(n));
  return idx;
}

/// Bundles everything a run wrote, for the manifest.
struct Manifest {
  std::string command;
  json config;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::vector<std::string> outputs;
  std::vector<std::string> warnings;
  json extra = json::object();

  Manifest(std::string cmd, json cfg, std::uint64_t s, std::size_t t)
      : command(std::move(cmd)), config(std::move(cfg)), seed(s), threads(t) {}

  void write(const fs::path& dir, double seconds) const {
    json j = {{"tool", "drgate"},
              {"version", version()},
              {"command", command},
              {"config", config},
              {"config_hash", fnv1a_hex(config.dump())},
              {"seed", seed},
              {"threads", threads},
              {"outputs", outputs},
              {"warnings", warnings},
              {"wall_time_seconds", seconds}};
    for (const auto& [k, v] : extra.items()) j[k] = v;
    write_json(dir / "manifest.json", j);
  }
};

fs::path prepare_output_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) fail(ErrorKind::Resource, "cannot create output directory " + cfg.output_dir.string() + ": " + ec.message());
  return cfg.output_dir;
}

/// Condition check for the realized bandwidth, when first-stage rates were supplied.
void rate_warnings(const RunConfig& cfg, theory::Regime regime, double h, std::size_t n, std::size_t lambda_z,
                   const std::string& label, std::vector<std::string>& warnings, json& diagnostics) {
  if (!cfg.delta_p || !cfg.delta_m) return;
  theory::RateSpec spec{static_cast<int>(lambda_z), cfg.pipeline.kernel.order, *cfg.delta_p, *cfg.delta_m};
  spec.validate();
  const double dh = theory::bandwidth_exponent(h, n);
  const auto diag = theory::check_config(spec, dh, regime);
  auto dj = diag.to_json();
  dj["label"] = label;
  diagnostics.push_back(dj);
  if (diag.all_pass) return;
  std::string failed;
  for (const auto& c : diag.checks)
    if (!c.pass) failed += (failed.empty() ? "" : ", ") + c.item;
  warnings.push_back(label + ": bandwidth exponent " + format_number(dh) + " violates the " +
                     theory::to_string(regime) + " rate conditions (" + failed + ")");
}

void overlap_warning(const SupportReport& s, std::vector<std::string>& warnings) {
  if (s.overlap_warning)
    warnings.push_back("propensity clipping affected " + format_number(100.0 * s.clip_fraction) +
                       "% of rows; overlap looks weak");
}

json fit_log_json(const NuisanceFits& fits) {
  json log = json::array();
  for (const auto& rec : fits.log)
    log.push_back({{"fold", rec.fold},
                   {"role", to_string(rec.role)},
                   {"training_rows", rec.training_rows.size()},
                   {"members", rec.members},
                   {"weights", rec.weights}});
  return log;
}

}  // namespace

const char* version() noexcept { return detail::kVersion; }

const json& run_config_schema() {
  static const json schema = json::parse(detail::kRunConfigSchema);
  return schema;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  validate_against_schema(j, run_config_schema(), "run configuration");
  RunConfig c;
  c.raw = j;
  try {
    if (j.contains("data")) {
      const auto& d = j.at("data");
      if (d.contains("synthetic")) {
        if (d.contains("path")) fail(ErrorKind::Configuration, "data needs either a path or a synthetic block, not both");
        c.synthetic = sim::DgpSpec::from_json(d.at("synthetic"));
      } else {
        if (!d.contains("path")) fail(ErrorKind::Configuration, "data.path is required", "name a CSV file");
        c.data_path = d.at("path").get<std::string>();
        if (c.data_path.is_relative() && !base_dir.empty()) c.data_path = base_dir / c.data_path;
        json roles = d;
        roles.erase("path");
        c.roles = ColumnRoles::from_json(roles);
      }
    }
    if (j.contains("pipeline")) c.pipeline = PipelineConfig::from_json(j.at("pipeline"));
    if (j.contains("queries")) {
      const auto& q = j.at("queries");
      if (q.is_number()) c.query_points = q.get<std::size_t>();
      else c.queries = matrix_from_rows(q.get<std::vector<std::vector<double>>>());
    }
    if (j.contains("moderator_sets")) c.moderator_sets = j.at("moderator_sets").get<std::vector<std::vector<std::string>>>();
    if (j.contains("sensitivity")) c.sensitivity = j.at("sensitivity").get<std::vector<double>>();
    c.export_scores = j.value("export_scores", false);
    if (j.contains("theory")) {
      c.delta_p = j.at("theory").at("delta_p").get<double>();
      c.delta_m = j.at("theory").at("delta_m").get<double>();
    }
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    if (j.contains("output_dir")) {
      c.output_dir = j.at("output_dir").get<std::string>();
      if (c.output_dir.is_relative() && !base_dir.empty()) c.output_dir = base_dir / c.output_dir;
    }
    if (j.contains("simulation")) {
      json s = j.at("simulation");
      if (!s.contains("seed")) s["seed"] = c.seed;
      c.simulation = sim::McConfig::from_json(s);
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Configuration, std::string("bad run configuration: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::Configuration, "cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, "config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j, path.parent_path());
}

Dataset RunConfig::dataset() const {
  if (synthetic) return sim::generate(*synthetic).data;
  if (!roles) fail(ErrorKind::Configuration, "the configuration has no data block", "add data.path and column roles");
  Dataset ds = load_csv(data_path.string(), *roles);
  if (roles->expand.degree > 1 || roles->expand.interactions)
    ds = expand_features(ds, roles->expand.degree, roles->expand.interactions);
  return ds;
}

json cmd_estimate_gate(const RunConfig& cfg) {
  const auto started = std::chrono::steady_clock::now();
  const fs::path dir = prepare_output_dir(cfg);
  Manifest manifest("estimate-gate", cfg.raw, cfg.seed, max_threads());

  Dataset ds = cfg.dataset();
  const Eigen::MatrixXd queries = cfg.queries ? *cfg.queries : default_query_grid(ds, cfg.query_points);
  if (queries.cols() != static_cast<Eigen::Index>(ds.lambda_z()))
    fail(ErrorKind::Configuration, "queries have " + std::to_string(queries.cols()) + " coordinates but there are " +
                                       std::to_string(ds.lambda_z()) + " moderators");
  const auto r = run_pipeline(ds, cfg.pipeline, queries, cfg.seed, {.gate = true, .smoothed_ate = false});
  const GateCurve& curve = *r.gate;

  {
    std::ostringstream csv;
    curve.write_csv(csv);
    write_text(dir / "gate.csv", csv.str());
    write_json(dir / "gate.json", curve.to_json());
    manifest.outputs.insert(manifest.outputs.end(), {"gate.csv", "gate.json"});
  }
  for (double multiple : cfg.sensitivity) {
    const auto c = estimate_gate(r.psi, ds, queries, r.bandwidth.scaled(multiple), cfg.pipeline.kernel, cfg.pipeline.level);
    std::ostringstream csv;
    c.write_csv(csv);
    const std::string name = "gate_bw_x" + format_number(multiple) + ".csv";
    write_text(dir / name, csv.str());
    manifest.outputs.push_back(name);
  }

  const auto support = support_report(r.fits);
  overlap_warning(support, manifest.warnings);
  json support_j = support.to_json();
  support_j["fits"] = fit_log_json(r.fits);
  write_json(dir / "support.json", support_j);
  manifest.outputs.push_back("support.json");

  if (cfg.export_scores) {
    std::ostringstream csv;
    write_scores_csv(r.psi, csv);
    write_text(dir / "scores.csv", csv.str());
    manifest.outputs.push_back("scores.csv");
  }

  std::size_t undefined = 0;
  for (auto f : curve.flags) undefined += (f & kGateUndefined) != 0;
  if (undefined > 0)
    manifest.warnings.push_back(std::to_string(undefined) + " queries have no local data (flag undefined)");
  json diagnostics = json::array();
  rate_warnings(cfg, theory::Regime::Gate, r.bandwidth.h, ds.n(), ds.lambda_z(), "gate", manifest.warnings, diagnostics);
  if (!diagnostics.empty()) manifest.extra["rate_conditions"] = diagnostics;

  json summary = {{"command", "estimate-gate"},
                  {"n", ds.n()},
                  {"queries", curve.size()},
                  {"bandwidth", r.bandwidth.h},
                  {"outputs", manifest.outputs},
                  {"warnings", manifest.warnings}};
  manifest.extra["bandwidth"] = r.bandwidth.h;
  manifest.write(dir, std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
  return summary;
}

json cmd_estimate_ate(const RunConfig& cfg) {
  const auto started = std::chrono::steady_clock::now();
  const fs::path dir = prepare_output_dir(cfg);
  Manifest manifest("estimate-ate", cfg.raw, cfg.seed, max_threads());

  Dataset ds = cfg.dataset();
  const auto r = run_pipeline(ds, cfg.pipeline, Eigen::MatrixXd(0, static_cast<Eigen::Index>(ds.lambda_z())), cfg.seed,
                              {.gate = false, .smoothed_ate = false});

  std::vector<std::vector<std::string>> sets = cfg.moderator_sets;
  if (sets.empty()) sets.push_back(ds.z_names());

  std::vector<AteResult> results;
  json diagnostics = json::array();
  for (const auto& names : sets) {
    const Dataset view = ds.with_moderators(moderator_indices(ds, names));
    const Eigen::MatrixXd z = view.z();
    const Bandwidth bw = select_bandwidth(cfg.pipeline.bandwidth, r.psi.psi, z, cfg.pipeline.kernel);
    auto res = smoothed_ate(r.psi, view, bw, cfg.pipeline.kernel, cfg.pipeline.level);
    std::string label = "smoothed(";
    for (std::size_t k = 0; k < names.size(); ++k) label += (k ? "," : "") + names[k];
    label += ")";
    rate_warnings(cfg, theory::Regime::Ate, bw.h, ds.n(), names.size(), label, res.warnings, diagnostics);
    for (const auto& w : res.warnings) manifest.warnings.push_back(w);
    results.push_back(std::move(res));
  }
  results.push_back(r.averaged_aipw);
  results.push_back(r.averaged_ipw);
  const auto comparison = compare_ate(results);

  write_json(dir / "ate.json", comparison.to_json());
  {
    std::ostringstream csv;
    csv << "method,moderators,estimate,se,ci_lower,ci_upper,bandwidth\n" << std::setprecision(17);
    for (const auto& a : results) {
      std::string mods;
      for (std::size_t k = 0; k < a.smoothing_moderators.size(); ++k) mods += (k ? ";" : "") + a.smoothing_moderators[k];
      csv << to_string(a.method) << ',' << mods << ',' << a.estimate << ',' << a.std_error << ',' << a.ci_lower << ','
          << a.ci_upper << ',';
      if (a.bandwidth) csv << a.bandwidth->h;
      csv << '\n';
    }
    write_text(dir / "ate.csv", csv.str());
  }
  const auto support = support_report(r.fits);
  overlap_warning(support, manifest.warnings);
  json support_j = support.to_json();
  support_j["fits"] = fit_log_json(r.fits);
  write_json(dir / "support.json", support_j);
  manifest.outputs = {"ate.json", "ate.csv", "support.json"};
  if (cfg.export_scores) {
    std::ostringstream csv;
    write_scores_csv(r.psi, csv);
    write_text(dir / "scores.csv", csv.str());
    manifest.outputs.push_back("scores.csv");
  }
  if (!diagnostics.empty()) manifest.extra["rate_conditions"] = diagnostics;

  json estimates = json::array();
  for (const auto& a : results) estimates.push_back(a.to_json());
  json summary = {{"command", "estimate-ate"},
                  {"n", ds.n()},
                  {"estimates", estimates},
                  {"outputs", manifest.outputs},
                  {"warnings", manifest.warnings}};
  manifest.write(dir, std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
  return summary;
}

json cmd_simulate(const RunConfig& cfg) {
  if (!cfg.simulation) fail(ErrorKind::Configuration, "simulate needs a simulation block", "see configs/quickcheck.json");
  const auto started = std::chrono::steady_clock::now();
  const fs::path dir = prepare_output_dir(cfg);
  Manifest manifest("simulate", cfg.raw, cfg.simulation->seed, max_threads());

  const auto report = sim::run_mc(*cfg.simulation);
  const std::string report_text = report.to_json().dump(2) + "\n";
  write_text(dir / "mc_report.json", report_text);
  std::ostringstream csv;
  report.write_replications_csv(csv);
  write_text(dir / "replications.csv", csv.str());
  manifest.outputs = {"mc_report.json", "replications.csv"};
  if (!cfg.simulation->dgp.overlap_ok())
    manifest.warnings.push_back("the design's propensity leaves [0.05, 0.95] with probability above 1%");
  const std::string report_hash = fnv1a_hex(report_text);
  manifest.extra["report_hash"] = report_hash;
  manifest.write(dir, std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
  return {{"command", "simulate"},
          {"replications", report.replications},
          {"report_hash", report_hash},
          {"outputs", manifest.outputs},
          {"warnings", manifest.warnings}};
}

json cmd_bandwidth_range(int lambda_z, int kernel_order, double delta_p, double delta_m, const std::string& regime) {
  theory::RateSpec spec{lambda_z, kernel_order, delta_p, delta_m};
  spec.validate();
  const auto reg = theory::regime_from_string(regime);
  json j = theory::range(spec, reg).to_json();
  j["lambda_z"] = lambda_z;
  j["kernel_order"] = kernel_order;
  j["delta_p"] = delta_p;
  j["delta_m"] = delta_m;
  j["threshold"] = reg == theory::Regime::Gate ? theory::gate_threshold(lambda_z, kernel_order)
                                               : theory::ate_threshold(lambda_z, kernel_order);
  return j;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Doubly robust GATE and smoothed ATE estimation", "drgate"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version());

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out_dir;
  auto add_globals = [&](CLI::App* a) {
    a->add_option("--config", config_path, "run configuration (JSON)");
    a->add_option("--seed", seed, "master seed");
    a->add_option("--threads", threads, "worker cap (0 = all cores)");
    a->add_option("--out-dir", out_dir, "output directory");
  };
  add_globals(&app);

  auto* gate = app.add_subcommand("estimate-gate", "GATE curve on a query grid");
  std::vector<double> sensitivity;
  bool export_scores = false;
  gate->add_option("--sensitivity", sensitivity, "bandwidth multiples, comma separated")->delimiter(',');
  gate->add_flag("--export-scores", export_scores, "write the per-row scores");
  add_globals(gate);

  auto* ate = app.add_subcommand("estimate-ate", "smoothed and averaged ATE estimates");
  ate->add_flag("--export-scores", export_scores, "write the per-row scores");
  add_globals(ate);

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study on a synthetic design");
  add_globals(simulate);

  auto* range = app.add_subcommand("bandwidth-range", "feasible bandwidth exponents");
  int lambda_z = 1, kernel_order = 2;
  double delta_p = 0.25, delta_m = 0.25;
  std::string regime = "gate";
  range->add_option("--lambda-z", lambda_z, "number of moderators")->required();
  range->add_option("--kernel-order", kernel_order, "kernel order r")->required();
  range->add_option("--delta-p", delta_p, "propensity rate exponent")->required();
  range->add_option("--delta-m", delta_m, "outcome rate exponent")->required();
  range->add_option("--regime", regime, "gate or ate");
  add_globals(range);

  std::vector<std::string> argv_rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << version() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    for (auto* sub : app.get_subcommands())
      if (sub->parsed()) {
        err << sub->help();
        return 2;
      }
    err << app.help();
    return 2;
  }

  try {
    if (threads) set_max_threads(*threads);
    if (range->parsed()) {
      json j = cmd_bandwidth_range(lambda_z, kernel_order, delta_p, delta_m, regime);
      out << j.dump(2) << '\n';
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_json(fs::path(out_dir) / "bandwidth_range.json", j);
      }
      return 0;
    }

    if (config_path.empty()) fail(ErrorKind::Configuration, "--config is required for this command");
    std::ifstream f(config_path);
    if (!f) fail(ErrorKind::Configuration, "cannot open config file " + config_path);
    json j;
    try {
      j = json::parse(f);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::Parse, "config file " + config_path + " is not valid JSON: " + e.what());
    }
    if (seed) {
      j["seed"] = *seed;
      if (j.contains("simulation")) j["simulation"]["seed"] = *seed;
    }
    if (threads) j["threads"] = *threads;
    const fs::path base = fs::path(config_path).parent_path();
    if (!out_dir.empty()) j["output_dir"] = fs::absolute(out_dir).string();
    if (gate->parsed() && !sensitivity.empty()) j["sensitivity"] = sensitivity;
    if (export_scores) j["export_scores"] = true;

    const RunConfig cfg = RunConfig::from_json(j, base);
    if (!threads && cfg.threads > 0) set_max_threads(cfg.threads);

    json summary;
    if (gate->parsed()) summary = cmd_estimate_gate(cfg);
    else if (ate->parsed()) summary = cmd_estimate_ate(cfg);
    else summary = cmd_simulate(cfg);
    for (const auto& w : summary.at("warnings")) err << "warning: " << w.get<std::string>() << '\n';
    out << summary.dump(2) << '\n';
    return 0;
  } catch (const Error& e) {
    err << "error [" << e.module() << "]: " << e.what() << '\n';
    if (!e.hint().empty()) err << "hint: " << e.hint() << '\n';
    return e.is_user_error() ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace drgate::cli
