#pragma once

#include <stdexcept>
#include <string>

namespace bdf {

/// Root of every error raised by the library. `code()` is a short stable tag
/// the CLI prints and maps to an exit status.
class Error : public std::runtime_error {
 public:
  Error(const char* code, const std::string& what) : std::runtime_error(what), code_(code) {}
  const char* code() const noexcept { return code_; }

 private:
  const char* code_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error("E_INVALID_ARGUMENT", what) {}
};

/// A requested size exceeds a configured cap (basis size, GP oracle size).
class CapacityError : public Error {
 public:
  explicit CapacityError(const std::string& what) : Error("E_CAPACITY", what) {}
};

/// Factorization or inversion failed even after regularization.
class NumericalFailure : public Error {
 public:
  explicit NumericalFailure(const std::string& what) : Error("E_NUMERIC", what) {}
};

/// Malformed or unusable input data (CSV rows, trajectories, empty datasets).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error("E_DATA", what) {}
};

/// Saved-field container could not be read.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error("E_FORMAT", what) {}
};

class VersionError : public Error {
 public:
  explicit VersionError(const std::string& what) : Error("E_VERSION", what) {}
};

}  // namespace bdf
