#include "gmu/error.hpp"

namespace gmu {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::AsymmetricInput: return "AsymmetricInput";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::AllNegativeInfinity: return "AllNegativeInfinity";
    case ErrorCode::InvalidProbability: return "InvalidProbability";
    case ErrorCode::NegativeInput: return "NegativeInput";
    case ErrorCode::InvalidDegreesOfFreedom: return "InvalidDegreesOfFreedom";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::MissingClass: return "MissingClass";
    case ErrorCode::SingularClass: return "SingularClass";
    case ErrorCode::BadLabel: return "BadLabel";
    case ErrorCode::InsufficientSupport: return "InsufficientSupport";
    case ErrorCode::DegenerateDraw: return "DegenerateDraw";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptPayload: return "CorruptPayload";
    case ErrorCode::MalformedScan: return "MalformedScan";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace gmu
