#pragma once

#include <stdexcept>
#include <string>

namespace fleetcer {

// Base for every error raised by the core. The C API maps the concrete
// subclasses onto status codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A documented precondition was violated by the caller.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed text input. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

// Pattern set is well-formed text but semantically invalid (unknown fluent,
// cyclic dependency, unknown event type).
class PatternError : public ParseError {
 public:
  using ParseError::ParseError;
};

class NoRecordsError : public Error {
 public:
  using Error::Error;
};

}  // namespace fleetcer
