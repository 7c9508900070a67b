#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace isoline {

/// Base class for all recoverable errors raised by this library.
/// Programmer errors (violated constructor invariants, bad arguments)
/// throw std::invalid_argument instead.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Query outside a gridded field's rectangle (no extrapolation).
class OutOfDomain : public Error {
 public:
  using Error::Error;
};

/// Gradient-dependent quantity requested where the gradient vanishes
/// or is undefined (e.g. the source point of a radial field).
class SingularPoint : public Error {
 public:
  using Error::Error;
};

/// Requested isoline level outside the attainable range of the field.
class InfeasibleLevel : public Error {
 public:
  using Error::Error;
};

/// Region with no interior passed where samples are required.
class EmptyRegion : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Grid header dimensions disagree with the number of values present.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Integration or update step with nonpositive dt (or speed).
class NonpositiveStep : public Error {
 public:
  using Error::Error;
};

/// Oracle derivative mode selected but no oracle value supplied.
class MissingOracle : public Error {
 public:
  using Error::Error;
};

/// Scenario fails its preconditions; message names the offending field.
class InvalidScenario : public Error {
 public:
  using Error::Error;
};

/// Scenario whose start pose already violates the field domain; callers
/// report it as a domain failure rather than a configuration mistake.
class InitialOutOfDomain : public InvalidScenario {
 public:
  using InvalidScenario::InvalidScenario;
};

/// The crossing-angle margin makes the gain threshold undefined.
class InfeasibleMargin : public Error {
 public:
  using Error::Error;
};

/// atanh argument at or beyond 1; the bound does not exist.
class BoundUndefined : public Error {
 public:
  using Error::Error;
};

class PreconditionViolated : public Error {
 public:
  using Error::Error;
};

class NotSymmetric : public Error {
 public:
  using Error::Error;
};

class EmptyTrajectory : public Error {
 public:
  using Error::Error;
};

/// Bad configuration document; message names the offending key or line.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace isoline
