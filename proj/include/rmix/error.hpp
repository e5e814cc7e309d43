#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace rmix {

/// Raised when a distribution or model parameter violates its precondition.
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A chain produced a non-finite state; `iteration` is 1-based.
class ChainDiverged : public std::runtime_error {
 public:
  ChainDiverged(const std::string& what, std::size_t iteration)
      : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

/// No multi-start of a numerical optimizer converged. Carries the best point seen.
class OptimizationFailure : public std::runtime_error {
 public:
  OptimizationFailure(const std::string& what, std::vector<double> best_point, double best_value)
      : std::runtime_error(what), best_point_(std::move(best_point)), best_value_(best_value) {}
  const std::vector<double>& best_point() const noexcept { return best_point_; }
  double best_value() const noexcept { return best_value_; }

 private:
  std::vector<double> best_point_;
  double best_value_;
};

/// Malformed input file; `line` is 1-based (0 when the problem is not tied to a line).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? what + " at line " + std::to_string(line) : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace rmix
