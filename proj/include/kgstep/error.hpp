#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace kgstep {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (odd cell count, bad bandwidth, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An iterative or direct solve failed.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual, int iterations,
              std::optional<long> step = std::nullopt)
      : Error(what), residual_(residual), iterations_(iterations), step_(step) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }
  std::optional<long> step() const noexcept { return step_; }

 private:
  double residual_;
  int iterations_;
  std::optional<long> step_;
};

/// A reference solution cannot be trusted for the requested input.
class OracleError : public Error {
 public:
  using Error::Error;
};

}  // namespace kgstep
