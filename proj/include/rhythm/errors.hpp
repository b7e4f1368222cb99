#pragma once

#include <stdexcept>
#include <string>

namespace rhythm {

/// Malformed or out-of-domain input (CLI exit code 2).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Nonfinite or otherwise broken numerics (CLI exit code 3).
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint does not belong to the requested run (CLI exit code 4).
class ResumeMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidInput(what);
}

}  // namespace rhythm
