#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace freeknot {

// Bad user-supplied parameters or data. CLI maps these to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ParameterError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class KnotError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class KnotGapError : public KnotError {
 public:
  using KnotError::KnotError;
};

class KnotOrderError : public KnotError {
 public:
  using KnotError::KnotError;
};

class KnotEndpointError : public KnotError {
 public:
  using KnotError::KnotError;
};

class InfeasibleSegmentError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class PreconditionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class MembershipError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DegenerateKnotError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Numerical breakdown inside a solver.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RankDeficiencyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SolverError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Enumeration refused before any work is done. CLI maps this to exit code 2.
class BudgetExceededError : public std::runtime_error {
 public:
  BudgetExceededError(double estimate, double budget)
      : std::runtime_error("enumeration budget exceeded: about " + std::to_string(estimate) +
                           " configurations, budget " + std::to_string(budget)),
        estimate_(estimate),
        budget_(budget) {}
  double estimate() const { return estimate_; }
  double budget() const { return budget_; }

 private:
  double estimate_;
  double budget_;
};

}  // namespace freeknot
