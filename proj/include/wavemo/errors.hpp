#pragma once

#include <stdexcept>
#include <string>

namespace wavemo {

/// Bad configuration (grid, options, config file values).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Caller broke a documented precondition on an otherwise valid object.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// NaN, divergence, or an under-determined problem.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A single frame cannot separate scene from unknown aberration.
class UnderdeterminedError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace wavemo
