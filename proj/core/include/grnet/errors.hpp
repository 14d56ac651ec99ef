#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace grnet {

// Base error carrying a short machine-readable code. The CLI prints
// "error code=<code> message=..." on a single line and exits nonzero.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

// Shape or dimension mismatch between tensors / maps / configs.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& message)
      : Error("dimension", message) {}
};

// Violated internal contract (mismatched graph configs, empty window sets).
class LogicError : public Error {
 public:
  explicit LogicError(const std::string& message) : Error("logic", message) {}
};

// Invalid run configuration (bad scales, empty softmax rows, geometry).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error("config", message) {}
  ConfigError(std::string code, const std::string& message)
      : Error(std::move(code), message) {}
};

// Bad or missing data: manifests, feature files, checkpoints. The code
// distinguishes failure classes ("manifest-duplicate-item", ...).
class DataError : public Error {
 public:
  DataError(std::string code, const std::string& message)
      : Error(std::move(code), message) {}
};

// Numeric breakdown: NaN gradients, nondeterministic objectives.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& message)
      : Error("numeric", message) {}
};

// Invalid argument supplied by a caller (labels outside {0,1}, k < 1).
class InputError : public Error {
 public:
  explicit InputError(const std::string& message) : Error("input", message) {}
};

}  // namespace grnet
