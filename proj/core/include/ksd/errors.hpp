#pragma once

#include <stdexcept>

namespace ksd {

// Exit-code mapping used by the CLI: ConfigError -> 2, EstimatorRefusal -> 3,
// InvariantViolation -> 4.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Depth too large for the alphabet: the block key no longer fits.
class TableOverflow : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// A trajectory left the phase-space domain of its system.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EstimatorRefusal : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ksd
