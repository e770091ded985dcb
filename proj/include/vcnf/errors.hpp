#pragma once

#include <stdexcept>
#include <string>

namespace vcnf {

/// Invalid configuration (bad hyperparameters, unknown keys, mismatched problem types).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Caller broke a documented precondition (dimension mismatch, bad sizes).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raw conditioner output could not be decoded into a valid spline.
class DecodeError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Non-finite input or intermediate value.
class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A quadrature or sampling oracle could not meet its accuracy guard.
class AccuracyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vcnf
