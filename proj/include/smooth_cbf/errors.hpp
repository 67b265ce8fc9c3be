#pragma once

#include <stdexcept>
#include <string>

namespace smooth_cbf {

/// Invalid construction parameters, dimension mismatches, bad scenario files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite state, input or constraint data.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Asking the scheduler for a transition that has no successor task.
class SequencingError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace smooth_cbf
