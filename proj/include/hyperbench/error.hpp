#pragma once

#include <stdexcept>
#include <string>

namespace hyperbench {

// Base of every error the library raises. Callers that only need a message
// catch this; the derived types let the CLI and runner map failures onto
// exit codes and record statuses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value violates a type invariant (non-finite entry, bad wavelengths, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A user-supplied parameter is out of its domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Two operands disagree in shape.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// File could not be read or written, or its contents do not parse.
class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace hyperbench
