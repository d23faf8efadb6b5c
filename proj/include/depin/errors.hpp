#pragma once

#include <stdexcept>
#include <string>

namespace depin {

/// Invalid parameters or configuration. The CLI maps this to a distinct exit code.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Query of the obstacle field outside the generated band.
class OutOfBand : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Failure while running a simulation or an estimate (NaN, bracketing failure, ...).
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace depin
