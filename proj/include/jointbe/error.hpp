#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace jointbe {

/// Broad failure classes; the CLI maps each to a distinct exit code.
enum class ErrorCategory {
  config = 2,
  input = 3,
  numerical = 4,
  solver = 5,
  io = 6,
};

std::string_view category_name(ErrorCategory c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

/// Thrown by the PJOR iteration; carries the residual reached before giving up.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double last_residual, int iterations)
      : Error(ErrorCategory::solver, what),
        last_residual_(last_residual),
        iterations_(iterations) {}

  double last_residual() const { return last_residual_; }
  int iterations() const { return iterations_; }

 private:
  double last_residual_;
  int iterations_;
};

}  // namespace jointbe
