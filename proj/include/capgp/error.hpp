#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace capgp {

/// Machine-readable failure codes shared by every module and by the wire
/// protocol. The string form (to_string) is what clients see.
enum class Errc {
  InvalidParams,
  ProfileShapeMismatch,
  TooFewPassImages,
  PositionOutOfRange,
  EmptyPositionSet,
  DuplicatePassImage,
  UnknownImageId,
  PoolTooSmall,
  PassImageMissing,
  PermutationCapExceeded,
  ChallengeConsumed,
  ChallengeExpired,
  RoundCountMismatch,
  EmptyAlphabet,
  UnsupportedGlyph,
  InvalidRenderParams,
  InvalidObservation,
  SegmentNotFound,
  InconsistentObservation,
  CapExceeded,
  UserExists,
  UnknownUser,
  UnknownChallenge,
  RateLimited,
  AttemptsExhausted,
  Unauthorized,
  StoreCorrupt,
  IoError,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidParams: return "InvalidParams";
    case Errc::ProfileShapeMismatch: return "ProfileShapeMismatch";
    case Errc::TooFewPassImages: return "TooFewPassImages";
    case Errc::PositionOutOfRange: return "PositionOutOfRange";
    case Errc::EmptyPositionSet: return "EmptyPositionSet";
    case Errc::DuplicatePassImage: return "DuplicatePassImage";
    case Errc::UnknownImageId: return "UnknownImageId";
    case Errc::PoolTooSmall: return "PoolTooSmall";
    case Errc::PassImageMissing: return "PassImageMissing";
    case Errc::PermutationCapExceeded: return "PermutationCapExceeded";
    case Errc::ChallengeConsumed: return "ChallengeConsumed";
    case Errc::ChallengeExpired: return "ChallengeExpired";
    case Errc::RoundCountMismatch: return "RoundCountMismatch";
    case Errc::EmptyAlphabet: return "EmptyAlphabet";
    case Errc::UnsupportedGlyph: return "UnsupportedGlyph";
    case Errc::InvalidRenderParams: return "InvalidRenderParams";
    case Errc::InvalidObservation: return "InvalidObservation";
    case Errc::SegmentNotFound: return "SegmentNotFound";
    case Errc::InconsistentObservation: return "InconsistentObservation";
    case Errc::CapExceeded: return "CapExceeded";
    case Errc::UserExists: return "UserExists";
    case Errc::UnknownUser: return "UnknownUser";
    case Errc::UnknownChallenge: return "UnknownChallenge";
    case Errc::RateLimited: return "RateLimited";
    case Errc::AttemptsExhausted: return "AttemptsExhausted";
    case Errc::Unauthorized: return "Unauthorized";
    case Errc::StoreCorrupt: return "StoreCorrupt";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace capgp
