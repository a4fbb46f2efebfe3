#include "wesinger2/error.hpp"

namespace wesinger2 {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyAudio: return "EmptyAudio";
    case ErrorCode::RateMismatch: return "RateMismatch";
    case ErrorCode::AllUnvoiced: return "AllUnvoiced";
    case ErrorCode::NonPositiveF0: return "NonPositiveF0";
    case ErrorCode::EmptyCollection: return "EmptyCollection";
    case ErrorCode::MixedSingers: return "MixedSingers";
    case ErrorCode::DoubleNormalize: return "DoubleNormalize";
    case ErrorCode::SingerMismatch: return "SingerMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::OverlapError: return "OverlapError";
    case ErrorCode::UnknownPhoneme: return "UnknownPhoneme";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonPositiveDuration: return "NonPositiveDuration";
    case ErrorCode::UnknownSinger: return "UnknownSinger";
    case ErrorCode::ChannelMismatch: return "ChannelMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InsufficientFrames: return "InsufficientFrames";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::KeyOutOfRange: return "KeyOutOfRange";
    case ErrorCode::FrameMismatch: return "FrameMismatch";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::StepOutOfRange: return "StepOutOfRange";
    case ErrorCode::NoTargetClips: return "NoTargetClips";
    case ErrorCode::NoOtherClips: return "NoOtherClips";
    case ErrorCode::DataIncomplete: return "DataIncomplete";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::NoVoicedOverlap: return "NoVoicedOverlap";
    case ErrorCode::IncompatibleCheckpoints: return "IncompatibleCheckpoints";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace wesinger2
