#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace carsnn {

enum class ErrorCode {
  MalformedHeader,
  TruncatedRecord,
  OutOfBoundsEvent,
  UnknownEventType,
  MalformedLine,
  NonMonotonicTimestamp,
  MissingSplit,
  EmptyClassDirectory,
  InvalidSpec,
  EmptyInput,
  DegenerateWindow,
  InvalidConfig,
  ShapeMismatch,
  MissingRecord,
  WeightOverflow,
  Infeasible,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::TruncatedRecord: return "TruncatedRecord";
    case ErrorCode::OutOfBoundsEvent: return "OutOfBoundsEvent";
    case ErrorCode::UnknownEventType: return "UnknownEventType";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case ErrorCode::MissingSplit: return "MissingSplit";
    case ErrorCode::EmptyClassDirectory: return "EmptyClassDirectory";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DegenerateWindow: return "DegenerateWindow";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MissingRecord: return "MissingRecord";
    case ErrorCode::WeightOverflow: return "WeightOverflow";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can branch on the kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace carsnn
