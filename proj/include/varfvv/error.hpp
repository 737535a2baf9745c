#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace varfvv {

enum class ErrorCode {
  Config,
  BudgetTooSmall,
  IncompleteAllocation,
  DuplicateFrame,
  OutOfOrderFrame,
  InvalidView,
  StarvedBuffer,
  IncompleteLog,
  Shape,
  NonFiniteValue,
  InsufficientHistory,
  Domain,
  Parse,
  Validation,
  Io,
  DecodabilityViolation,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Config: return "ConfigError";
    case ErrorCode::BudgetTooSmall: return "BudgetTooSmall";
    case ErrorCode::IncompleteAllocation: return "IncompleteAllocation";
    case ErrorCode::DuplicateFrame: return "DuplicateFrame";
    case ErrorCode::OutOfOrderFrame: return "OutOfOrderFrame";
    case ErrorCode::InvalidView: return "InvalidView";
    case ErrorCode::StarvedBuffer: return "StarvedBuffer";
    case ErrorCode::IncompleteLog: return "IncompleteLog";
    case ErrorCode::Shape: return "ShapeError";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::InsufficientHistory: return "InsufficientHistory";
    case ErrorCode::Domain: return "DomainError";
    case ErrorCode::Parse: return "ParseError";
    case ErrorCode::Validation: return "ValidationError";
    case ErrorCode::Io: return "IoError";
    case ErrorCode::DecodabilityViolation: return "DecodabilityViolation";
  }
  return "UnknownError";
}

/// Library-wide exception. Every failure carries a stable code so callers
/// (notably the CLI) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace varfvv
