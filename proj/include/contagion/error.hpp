#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace contagion {

class ContagionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public ContagionError {
 public:
  using ContagionError::ContagionError;
};

class NonPositiveNetLiability : public ContagionError {
 public:
  NonPositiveNetLiability(std::size_t bank, double value)
      : ContagionError("net liability of bank " + std::to_string(bank) +
                       " is not strictly positive (" + std::to_string(value) + ")"),
        bank_(bank),
        value_(value) {}
  std::size_t bank() const noexcept { return bank_; }
  double value() const noexcept { return value_; }

 private:
  std::size_t bank_;
  double value_;
};

class InvalidCorrelation : public ContagionError {
 public:
  using ContagionError::ContagionError;
};

class NonPositiveInitialAsset : public ContagionError {
 public:
  using ContagionError::ContagionError;
};

class InvalidRecoveryRate : public ContagionError {
 public:
  using ContagionError::ContagionError;
};

class CapitalExceedsAssets : public ContagionError {
 public:
  using ContagionError::ContagionError;
};

// Raised for malformed input files; carries the 1-based line of the fault.
class ParseError : public ContagionError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : ContagionError(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Raised when a well-formed config holds an out-of-range value.
class ValidationError : public ContagionError {
 public:
  ValidationError(std::string field, const std::string& what)
      : ContagionError(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace contagion
