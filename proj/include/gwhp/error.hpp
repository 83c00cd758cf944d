#pragma once

#include <stdexcept>
#include <string>

namespace gwhp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (bad shape, out-of-range value, unknown key).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed (singular system, linear solve residual too large, NaN loss).
class SolverError : public Error {
 public:
  using Error::Error;
};

/// On-disk artifact is malformed or truncated.
class CorruptFileError : public Error {
 public:
  using Error::Error;
};

/// On-disk artifact was written by an incompatible format version.
class VersionError : public Error {
 public:
  using Error::Error;
};

}  // namespace gwhp
