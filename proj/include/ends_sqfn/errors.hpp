#pragma once

#include <stdexcept>
#include <string>

namespace ends_sqfn {

/// Input outside the domain of an operation (s <= 0, on-diagonal kernel, bad grid, ...).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// An iterative or adaptive procedure ran out of budget before meeting its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent experiment/model configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A sparse factorization failed; cannot happen for an SPD system, so treated as fatal.
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ends_sqfn
