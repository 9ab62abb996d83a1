#include "acorn/error.hpp"

namespace acorn {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedLine: return "MalformedLine";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidProfile: return "InvalidProfile";
    case ErrorKind::EmptyClass: return "EmptyClass";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::ZeroMatrix: return "ZeroMatrix";
    case ErrorKind::EigenFailure: return "EigenFailure";
    case ErrorKind::UncalibratedDetector: return "UncalibratedDetector";
    case ErrorKind::LabelOverlap: return "LabelOverlap";
    case ErrorKind::LayoutMismatch: return "LayoutMismatch";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::CorruptBundle: return "CorruptBundle";
    case ErrorKind::Io: return "Io";
    case ErrorKind::NoCompleteSubsequence: return "NoCompleteSubsequence";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

ParseError::ParseError(ErrorKind kind, std::size_t line, const std::string& message)
    : Error(kind, "line " + std::to_string(line) + ": " + message), line_(line) {}

}  // namespace acorn
