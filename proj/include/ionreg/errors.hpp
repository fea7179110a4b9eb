#pragma once

#include <stdexcept>
#include <string>

namespace ionreg {

// Error families, mapped to process exit codes by the command layer:
// config/parse problems -> 2, feasibility gate -> 3, numerical failures -> 4.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct FeasibilityError : std::runtime_error {
  explicit FeasibilityError(const std::string& what)
      : std::runtime_error(what) {}
};

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace ionreg
