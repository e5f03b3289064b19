#pragma once

#include <stdexcept>
#include <string>

namespace satdiff {

/// Invalid configuration (manifest fields, precondition violations at the
/// config layer). The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A forward-Euler step left the admissible set by more than the rounding
/// tolerance; the driver halves dt and retries.
class StepRejected : public std::runtime_error {
 public:
  explicit StepRejected(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace satdiff
