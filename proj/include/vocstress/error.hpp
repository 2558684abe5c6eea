#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vocstress {

enum class ErrorCode {
  MalformedLine,
  InsufficientData,
  MissingAnchor,
  ZeroBaseline,
  NonPositiveResistance,
  AllMissingColumn,
  EmptyWindow,
  DegenerateInput,
  InsufficientOverlap,
  ZeroMean,
  NoHRData,
  InsufficientResponders,
  SingleClassTraining,
  DimensionMismatch,
  TooFewPerClass,
  SingleParticipant,
  SessionActive,
  NoActiveSession,
  RatingGate,
  SessionComplete,
  WrongCheckpoint,
  OutOfRange,
  InvalidSpec,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Wire/archive parse failure located at a byte offset into the offending line.
class ParseError : public Error {
 public:
  ParseError(std::size_t offset, const std::string& message)
      : Error(ErrorCode::MalformedLine, "at byte " + std::to_string(offset) + ": " + message),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace vocstress
