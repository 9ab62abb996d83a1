#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace acorn {

enum class ErrorKind {
  MalformedLine,
  OutOfRange,
  InvalidArgument,
  InvalidProfile,
  EmptyClass,
  TooFewSamples,
  ShapeMismatch,
  NonFiniteLoss,
  ZeroMatrix,
  EigenFailure,
  UncalibratedDetector,
  LabelOverlap,
  LayoutMismatch,
  VersionMismatch,
  CorruptBundle,
  Io,
  NoCompleteSubsequence,
};

std::string_view to_string(ErrorKind kind);

// All library failures surface as acorn::Error; callers switch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Trace ingestion errors additionally carry the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(ErrorKind kind, std::size_t line, const std::string& message);

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace acorn
