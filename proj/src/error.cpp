#include "bedsal/error.hpp"

namespace bedsal {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoValidDepth: return "NoValidDepth";
    case ErrorCode::MissingPair: return "MissingPair";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::UnknownSuperpixel: return "UnknownSuperpixel";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BadChannelCount: return "BadChannelCount";
    case ErrorCode::EmptyTrainSet: return "EmptyTrainSet";
    case ErrorCode::EmptyGroundTruth: return "EmptyGroundTruth";
    case ErrorCode::NoValidImages: return "NoValidImages";
    case ErrorCode::NonSquare: return "NonSquare";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
  }
  return "Unknown";
}

}  // namespace bedsal
