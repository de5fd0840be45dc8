#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace helmrom {

/// Invalid user input: bad mesh parameters, inadmissible coefficients,
/// mismatched dimensions. Thrown before any expensive work starts.
class InvalidArgumentError : public std::runtime_error {
 public:
  explicit InvalidArgumentError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Factorization failed (structurally or numerically singular matrix).
class SingularMatrixError : public std::runtime_error {
 public:
  explicit SingularMatrixError(const std::string& msg) : std::runtime_error(msg) {}
};

/// An iterative solve exhausted its budget without reaching tolerance.
/// Carries the relative residual history for diagnostics.
class ConvergenceFailure : public std::runtime_error {
 public:
  ConvergenceFailure(const std::string& msg, std::vector<double> history)
      : std::runtime_error(msg), residual_history(std::move(history)) {}
  std::vector<double> residual_history;
};

/// Non-finite values appeared inside an iteration (NaN/Inf contamination).
class NumericalBreakdown : public std::runtime_error {
 public:
  explicit NumericalBreakdown(const std::string& msg) : std::runtime_error(msg) {}
};

/// Operation not defined for the given discretization (e.g. broken H2
/// seminorm on piecewise-linear elements).
class UnsupportedOperation : public std::runtime_error {
 public:
  explicit UnsupportedOperation(const std::string& msg) : std::runtime_error(msg) {}
};

/// Data-driven recovery hit a denominator below the configured guard
/// (wavenumber grid too close to confluent).
class IllConditionedRecovery : public std::runtime_error {
 public:
  explicit IllConditionedRecovery(const std::string& msg) : std::runtime_error(msg) {}
};

/// Objective evaluation failed inside an inversion iteration.
class ObjectiveEvaluationError : public std::runtime_error {
 public:
  explicit ObjectiveEvaluationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// File / serialization problems (missing arrays, fingerprint mismatch, ...).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad CLI configuration (unknown keys, wrong types, missing fields).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace helmrom
