#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace shadow_ode {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: malformed expressions, inconsistent options.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : ValidationError(what), offset_(offset) {}

  /// 0-based byte offset into the source text.
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class SyntaxError : public ParseError {
 public:
  SyntaxError(std::size_t offset, std::vector<std::string> expected, std::string found);

  const std::vector<std::string>& expected() const noexcept { return expected_; }
  const std::string& found() const noexcept { return found_; }

 private:
  std::vector<std::string> expected_;
  std::string found_;
};

class UnknownIdentifier : public ParseError {
 public:
  UnknownIdentifier(std::size_t offset, std::string name);
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class ArityMismatch : public ParseError {
 public:
  ArityMismatch(std::size_t offset, std::string function, std::size_t expected, std::size_t got);

 private:
  std::string function_;
};

class DimensionMismatch : public ValidationError {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got);
  std::size_t expected() const noexcept { return expected_; }
  std::size_t got() const noexcept { return got_; }

 private:
  std::size_t expected_;
  std::size_t got_;
};

/// A function was evaluated outside its real domain.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what, std::int64_t index = -1)
      : Error(what), index_(index) {}

  /// Grid or summation index at which the fault happened, -1 when not applicable.
  std::int64_t index() const noexcept { return index_; }

 private:
  std::int64_t index_;
};

/// The limit construction failed to produce a certified answer.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

class OriginDiverged : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

class InsufficientLadder : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

class TooFewSamples : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

class LadderNonMonotone : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

class NoMeanValuePoint : public NumericalFailure {
 public:
  NoMeanValuePoint(const std::string& what, std::uint64_t step)
      : NumericalFailure(what), step_(step) {}
  std::uint64_t step() const noexcept { return step_; }

 private:
  std::uint64_t step_;
};

class SystemsUnsupported : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace shadow_ode
