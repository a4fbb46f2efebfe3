#pragma once

#include <stdexcept>
#include <string>

namespace wesinger2 {

enum class ErrorCode {
  EmptyAudio,
  RateMismatch,
  AllUnvoiced,
  NonPositiveF0,
  EmptyCollection,
  MixedSingers,
  DoubleNormalize,
  SingerMismatch,
  ParseError,
  OverlapError,
  UnknownPhoneme,
  EmptyInput,
  NonPositiveDuration,
  UnknownSinger,
  ChannelMismatch,
  LengthMismatch,
  InsufficientFrames,
  ShapeMismatch,
  KeyOutOfRange,
  FrameMismatch,
  TooShort,
  StepOutOfRange,
  NoTargetClips,
  NoOtherClips,
  DataIncomplete,
  NonFiniteLoss,
  NoVoicedOverlap,
  IncompatibleCheckpoints,
  InvalidConfig,
  Io,
};

const char* to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can branch on the kind rather than the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace wesinger2
