#pragma once

#include <stdexcept>
#include <string>

namespace memoctrl {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid or inconsistent configuration / input data (caught before any
// computation starts).
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Time-stepping failure: singular step matrix or non-finite state.
class SolverError : public Error {
public:
  SolverError(const std::string& msg, int step)
      : Error(msg + " (step " + std::to_string(step) + ")"), step_(step) {}
  int step() const { return step_; }

private:
  int step_;
};

// The requested analysis does not apply to the given data (e.g. the G_i
// factorization behind the derivative-shift rank test has no solution).
class InapplicableError : public Error {
public:
  explicit InapplicableError(const std::string& msg) : Error(msg) {}
};

} // namespace memoctrl
