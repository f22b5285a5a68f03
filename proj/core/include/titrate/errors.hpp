#pragma once

#include <stdexcept>
#include <string>

namespace titrate {

/// Raised when an input violates a documented precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A regime of interest has no support in the observed data (missing stratum,
/// zero adherence probability). Estimators report it instead of extrapolating.
class PositivityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Model fitting could not proceed (degenerate data, separation, ...).
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace titrate
