#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace opengt {

// Bad configuration or scenario content (detected before or between rounds).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A cost function could not be evaluated, or an iterative minimizer failed.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A runtime invariant of the algorithm was broken. Always a bug.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// File could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Scenario validation failure; carries every diagnostic found, not just the first.
class ScenarioError : public ConfigError {
 public:
  explicit ScenarioError(std::vector<std::string> diagnostics)
      : ConfigError(join(diagnostics)), diagnostics_(std::move(diagnostics)) {}

  const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out = "invalid scenario:";
    for (const auto& d : items) {
      out += "\n  - ";
      out += d;
    }
    return out;
  }

  std::vector<std::string> diagnostics_;
};

}  // namespace opengt
