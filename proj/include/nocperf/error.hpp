#pragma once

#include <stdexcept>
#include <string>

namespace nocperf {

// Error categories map one-to-one onto CLI exit codes (see tools/nocperf.cpp).

/// Input outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent configuration / input file.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A queue (or decomposed queue-node) has utilization >= 1.
class InstabilityError : public std::runtime_error {
public:
  explicit InstabilityError(const std::string& what, std::string where = {})
      : std::runtime_error(what), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

private:
  std::string where_;
};

/// Fixed-point iteration hit its iteration cap.
class NonConvergenceError : public std::runtime_error {
public:
  NonConvergenceError(const std::string& what, int iterations, double residual,
                      std::string where = {})
      : std::runtime_error(what), iterations_(iterations), residual_(residual),
        where_(std::move(where)) {}
  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }
  const std::string& where() const noexcept { return where_; }

private:
  int iterations_;
  double residual_;
  std::string where_;
};

/// Decomposition produced a non-physical quantity (p(0) <= 0).
class ModelBreakdownError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace nocperf
