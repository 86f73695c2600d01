#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "drgate/data.hpp"
#include "drgate/pipeline.hpp"
#include "drgate/sim.hpp"

namespace drgate::cli {

const char* version() noexcept;

/// The published run-configuration schema (schemas/run_config.schema.json).
const nlohmann::json& run_config_schema();

/// FNV-1a of a byte string, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& bytes);

/// A validated run configuration. Relative data paths resolve against the
/// directory of the configuration file.
struct RunConfig {
  nlohmann::json raw;  ///< the document after command-line overrides
  std::optional<ColumnRoles> roles;
  std::filesystem::path data_path;
  std::optional<sim::DgpSpec> synthetic;
  PipelineConfig pipeline;
  std::size_t query_points = 25;
  std::optional<Eigen::MatrixXd> queries;
  std::vector<std::vector<std::string>> moderator_sets;
  std::vector<double> sensitivity;
  bool export_scores = false;
  std::optional<double> delta_p;
  std::optional<double> delta_m;
  std::optional<sim::McConfig> simulation;
  std::uint64_t seed = 1;
  std::size_t threads = 0;
  std::filesystem::path output_dir = "drgate-out";

  /// Schema check followed by semantic parsing.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);

  /// The dataset named by the data block (a CSV file or a synthetic design).
  Dataset dataset() const;
};

/// Command results: the JSON that also goes into the run manifest.
nlohmann::json cmd_estimate_gate(const RunConfig& cfg);
nlohmann::json cmd_estimate_ate(const RunConfig& cfg);
nlohmann::json cmd_simulate(const RunConfig& cfg);
nlohmann::json cmd_bandwidth_range(int lambda_z, int kernel_order, double delta_p, double delta_m,
                                   const std::string& regime);

/// Full command-line entry point. Returns the process exit code: 0 on
/// success, 1 for runtime or numerical failures, 2 for configuration and
/// validation errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace drgate::cli
