#pragma once

#include <stdexcept>
#include <string>

namespace drgate {

/// Broad failure classes. The CLI maps them onto exit codes:
/// configuration/validation problems exit with 2, everything else with 1.
enum class ErrorKind {
  Configuration,
  Parse,
  Validation,
  Numerical,
  Convergence,
  Separation,
  Resource,
  NoLocalData,
  BandwidthSelection,
  Stratification,
  Aggregate,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message, std::string hint = {})
      : std::runtime_error(message), kind_(kind), module_(std::move(module)), hint_(std::move(hint)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }
  const std::string& hint() const noexcept { return hint_; }

  bool is_user_error() const noexcept {
    return kind_ == ErrorKind::Configuration || kind_ == ErrorKind::Parse ||
           kind_ == ErrorKind::Validation;
  }

 private:
  ErrorKind kind_;
  std::string module_;
  std::string hint_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(std::string module, const std::string& message, double kkt_residual)
      : Error(ErrorKind::Convergence, std::move(module), message,
              "increase the sweep limit or the penalty"),
        kkt_residual_(kkt_residual) {}

  double kkt_residual() const noexcept { return kkt_residual_; }

 private:
  double kkt_residual_;
};

const char* to_string(ErrorKind kind) noexcept;

}  // namespace drgate
