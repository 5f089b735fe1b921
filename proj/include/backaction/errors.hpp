#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace backaction {

/// Invalid user input or inconsistent component wiring (maps to CLI exit code 2).
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Requested Fock basis is larger than the configured cap.
class DimensionOverflowError : public ConfigError {
public:
  using ConfigError::ConfigError;
};

/// Components built over different bases or parameters.
class BasisMismatchError : public ConfigError {
public:
  using ConfigError::ConfigError;
};

/// Base of all numerical failures (maps to CLI exit code 3).
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

/// g is too large for the single-scattering model: A_u^2 would be negative.
class UnphysicalCouplingError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

/// A projection annihilated the state.
class ZeroNormError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

/// Numerical failure inside a trajectory, tagged with the 1-based event index.
class TrajectoryError : public NumericalError {
public:
  TrajectoryError(std::size_t event_index, const std::string& what)
      : NumericalError("event " + std::to_string(event_index) + ": " + what),
        event_index_(event_index) {}

  std::size_t event_index() const noexcept { return event_index_; }

private:
  std::size_t event_index_;
};

} // namespace backaction
