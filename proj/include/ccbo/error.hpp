#pragma once

#include <stdexcept>
#include <string>

namespace ccbo {

/// Input outside the domain of an operation (bad bounds, dimension mismatch,
/// empty sample, ...).
class DomainError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Surrogate fitting failed (singular covariance, conflicting duplicates).
class FitError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown, e.g. a Cholesky factorization that fails even after
/// jitter escalation.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class LookupError : public std::out_of_range {
public:
  using std::out_of_range::out_of_range;
};

/// Operation not allowed in the current state (stopped campaign, exhausted
/// game, too few observations for a model-based strategy).
class StateError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// StateError with a machine-readable reason, e.g. "stopped" or
/// "already-observed".
class ConflictError : public StateError {
public:
  ConflictError(std::string code, const std::string& msg) : StateError(msg), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

private:
  std::string code_;
};

} // namespace ccbo
