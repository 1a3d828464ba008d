#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pdpm {

// Error taxonomy shared by every module. Each maps onto one CLI exit code
// (see cli.hpp): config/shape -> 1, io -> 2, numerical -> 3.

struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when sampler bookkeeping is inconsistent (e.g. a unit sits on a
// zero-weight component). Indicates a bug, never bad user input.
struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

struct ConfigError : std::invalid_argument {
  ConfigError(const std::string& field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure inside a chain, tagged with the sweep that failed.
struct ChainAbort : NumericalError {
  ChainAbort(std::size_t sweep, const std::string& what)
      : NumericalError("sweep " + std::to_string(sweep) + ": " + what),
        sweep_(sweep) {}
  std::size_t sweep() const noexcept { return sweep_; }

 private:
  std::size_t sweep_;
};

}  // namespace pdpm
