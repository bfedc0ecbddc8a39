#pragma once

#include <stdexcept>
#include <string>

namespace backtrack {

// Shape or size mismatch between tensors / graph structures.
class DimensionError : public std::runtime_error {
 public:
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid user-supplied configuration (bad maze size, missing goal, ...).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure during optimization (non-finite loss or gradient).
class TrainingError : public std::runtime_error {
 public:
  explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

// A caller broke a documented precondition.
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& msg) : std::logic_error(msg) {}
};

// File read/write failure.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// A pipeline stage failed; carries the stage name.
class StageError : public std::runtime_error {
 public:
  StageError(const std::string& stage, const std::string& msg)
      : std::runtime_error("stage '" + stage + "': " + msg), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace backtrack
