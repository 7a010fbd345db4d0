#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace iwave {

// Root of every error raised by the library. Callers that only care about
// "something failed" catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the admissible set of a formula (e.g. omega off the strip).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Bad or inconsistent geometric construction (e.g. rounding radius too big).
class GeometryError : public Error {
 public:
  using Error::Error;
};

// Invalid user configuration: unknown keys, clockwise polygons, bad ranges.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. Carries the 1-based line number of the failure.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

// A linear form has the wrong number of critical points, or one is degenerate.
class NotLambdaSimple : public Error {
 public:
  NotLambdaSimple(const std::string& what, std::vector<double> thetas)
      : Error(what), thetas_(std::move(thetas)) {}
  const std::vector<double>& thetas() const { return thetas_; }

 private:
  std::vector<double> thetas_;
};

// Rotation number not detected as rational, so there is no cycle to refine.
class NoPeriodicOrbit : public Error {
 public:
  using Error::Error;
};

// Input object does not satisfy the documented precondition of an operation.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Neighborhoods used by the escape construction overlap or are not invariant.
class ShrinkDelta : public Error {
 public:
  using Error::Error;
};

// Linear system too close to singular for the requested accuracy.
class ConditioningError : public Error {
 public:
  using Error::Error;
};

}  // namespace iwave
