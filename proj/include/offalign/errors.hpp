#pragma once

#include <stdexcept>
#include <string>

namespace offalign {

// Shape disagreement between two tabular objects (policy vs reward, etc.).
struct DimensionError : std::invalid_argument {
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

// Argument outside the mathematical domain of an operation (z <= 0, y < -1/e, ...).
struct DomainError : std::domain_error {
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Iterative solver failed to converge; carries diagnostics for the offending context.
struct SolverError : std::runtime_error {
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed configuration or serialized input.
struct ConfigError : std::invalid_argument {
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace offalign
