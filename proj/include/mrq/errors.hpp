#pragma once

#include <stdexcept>
#include <string>

namespace mrq {

// Bad configuration: unknown names, dimension mismatches, invalid hyperparameters.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (stepping a finished episode,
// malformed simplex, negative TD magnitude, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Non-finite values or singular systems encountered during computation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mrq
