#pragma once

#include <stdexcept>
#include <string>

namespace wavemap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition of an operation was not met.
class PreconditionError : public Error {
public:
  using Error::Error;
};

/// An iterative numerical procedure did not reach its target tolerance.
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, double achieved)
      : Error(what + " (achieved " + std::to_string(achieved) + ")"), achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

private:
  double achieved_;
};

/// Malformed input text (config files, expressions, snapshots).
class ParseError : public Error {
public:
  ParseError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

private:
  int line_;
};

/// The time stepper produced a non-finite value.
class NumericalBlowup : public Error {
public:
  NumericalBlowup(const std::string& what, double last_valid_time)
      : Error(what), last_valid_time_(last_valid_time) {}
  double last_valid_time() const noexcept { return last_valid_time_; }

private:
  double last_valid_time_;
};

/// Input lies outside the domain where an operation is defined.
class DomainError : public Error {
public:
  using Error::Error;
};

}  // namespace wavemap
