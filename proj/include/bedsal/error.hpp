#pragma once

#include <stdexcept>
#include <string>

namespace bedsal {

enum class ErrorCode {
  NoValidDepth,
  MissingPair,
  BadMagic,
  DimMismatch,
  TruncatedPayload,
  IoError,
  ImageTooSmall,
  UnknownSuperpixel,
  ShapeMismatch,
  BadChannelCount,
  EmptyTrainSet,
  EmptyGroundTruth,
  NoValidImages,
  NonSquare,
  ConfigError,
  MissingArtifact,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // Validation failures map to CLI exit code 1, everything else to 2.
  bool is_validation() const noexcept {
    return code_ == ErrorCode::ConfigError || code_ == ErrorCode::MissingArtifact ||
           code_ == ErrorCode::MissingPair;
  }

 private:
  ErrorCode code_;
};

}  // namespace bedsal
