#include "vocstress/error.hpp"

namespace vocstress {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::MissingAnchor: return "MissingAnchor";
    case ErrorCode::ZeroBaseline: return "ZeroBaseline";
    case ErrorCode::NonPositiveResistance: return "NonPositiveResistance";
    case ErrorCode::AllMissingColumn: return "AllMissingColumn";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::InsufficientOverlap: return "InsufficientOverlap";
    case ErrorCode::ZeroMean: return "ZeroMean";
    case ErrorCode::NoHRData: return "NoHRData";
    case ErrorCode::InsufficientResponders: return "InsufficientResponders";
    case ErrorCode::SingleClassTraining: return "SingleClassTraining";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TooFewPerClass: return "TooFewPerClass";
    case ErrorCode::SingleParticipant: return "SingleParticipant";
    case ErrorCode::SessionActive: return "SessionActive";
    case ErrorCode::NoActiveSession: return "NoActiveSession";
    case ErrorCode::RatingGate: return "RatingGate";
    case ErrorCode::SessionComplete: return "SessionComplete";
    case ErrorCode::WrongCheckpoint: return "WrongCheckpoint";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace vocstress
