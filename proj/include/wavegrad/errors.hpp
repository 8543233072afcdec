#pragma once

#include <stdexcept>
#include <string>

namespace wavegrad {

// Shapes of vectors/matrices passed to an operation do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Factorization of a matrix that should be positive definite failed.
class SingularityError : public std::runtime_error {
 public:
  SingularityError(const std::string& what, double smallest_pivot)
      : std::runtime_error(what), smallest_pivot_(smallest_pivot) {}
  double smallest_pivot() const noexcept { return smallest_pivot_; }

 private:
  double smallest_pivot_;
};

// Initial data for the constrained dynamics violates the Cauchy conditions.
class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Constraint drift exceeded the abort threshold during integration.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, double time, double drift)
      : std::runtime_error(what), time_(time), drift_(drift) {}
  double time() const noexcept { return time_; }
  double drift() const noexcept { return drift_; }

 private:
  double time_;
  double drift_;
};

// Malformed config, network file or trace.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wavegrad
