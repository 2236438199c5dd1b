#pragma once

#include <stdexcept>
#include <string>

namespace voxpom {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document (JSON, CSV). `line` is 1-based, 0 when unknown.
class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A domain precondition was violated (bad index, invalid node, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Some control cannot be recovered from the specified components.
class RankDeficientError : public Error {
 public:
  RankDeficientError(const std::string& what, int control)
      : Error(what), control_(control) {}
  /// Index of the offending control, -1 when the deficiency is not tied to one.
  int control() const noexcept { return control_; }

 private:
  int control_;
};

/// A least-squares or constrained system could not be satisfied.
class InconsistentError : public Error {
 public:
  InconsistentError(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// The finite-element system has an unrestrained or singular direction.
class SingularSystemError : public Error {
 public:
  using Error::Error;
};

/// Requested actuator or foot amplitude exceeds the stroke limit.
class StrokeLimitError : public Error {
 public:
  using Error::Error;
};

}  // namespace voxpom
