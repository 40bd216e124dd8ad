#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hypstruct {

enum class ErrorCode {
  MixedCurvature,
  OutsideBall,
  DimensionMismatch,
  EmptyInput,
  NotALeaf,
  InvalidLevelCounts,
  ParseError,
  ValidationError,
  DegenerateVariance,
  LengthMismatch,
  EmptyGroup,
  EmptyBatch,
  InsufficientVertices,
  UnnormalizedInput,
  ClassWithoutPositive,
  NonDifferentiablePoint,
  Diverged,
  PreconditionViolated,
  TemplateMismatch,
  NotSymmetric,
  DegenerateRow,
  IndexOutOfRange,
  ZeroDiameter,
  SingularAfterRegularization,
  MissingEntry,
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base exception for every failure raised by the library. The code is the
/// stable identifier; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Malformed hierarchy/config text. Line and column are 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& message)
      : Error(ErrorCode::ParseError, "line " + std::to_string(line) + ", column " +
                                         std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// NaN/inf loss during training.
class DivergedError : public Error {
 public:
  DivergedError(std::size_t epoch, std::size_t batch)
      : Error(ErrorCode::Diverged, "non-finite loss at epoch " + std::to_string(epoch) +
                                       ", batch " + std::to_string(batch)),
        epoch_(epoch),
        batch_(batch) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

}  // namespace hypstruct
