#pragma once

#include <stdexcept>
#include <string>

namespace sfrl {

/// Malformed environment, policy or run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// API misuse, e.g. episodes recorded out of order.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// An oblivious loss schedule shorter than the run.
class RunLengthError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// A confidence-set row admits no probability vector.
class ConfidenceSetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative solver failed to reach its tolerance.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sfrl
