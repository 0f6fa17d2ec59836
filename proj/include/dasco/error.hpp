#pragma once

#include <stdexcept>
#include <string>

namespace dasco {

// Numeric values double as CLI exit codes.
enum class ErrorKind {
  Contract = 2,
  Io = 3,
  Numeric = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Violated precondition or shape mismatch.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ErrorKind::Contract, what) {}
};

class DimensionError : public ContractError {
 public:
  explicit DimensionError(const std::string& what) : ContractError("dimension error: " + what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

/// Malformed file contents; the message names the offending field.
class FormatError : public IoError {
 public:
  explicit FormatError(const std::string& what) : IoError("format error: " + what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, "numeric error: " + what) {}
};

}  // namespace dasco
