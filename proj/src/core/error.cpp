#include "expressml/error.hpp"

namespace expressml {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "IoError";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonNumericScore: return "NonNumericScore";
    case ErrorCode::DuplicateSample: return "DuplicateSample";
    case ErrorCode::DuplicateCell: return "DuplicateCell";
    case ErrorCode::EmptyResult: return "EmptyResult";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::EmptyNode: return "EmptyNode";
    case ErrorCode::FeatureOutOfRange: return "FeatureOutOfRange";
    case ErrorCode::WidthMismatch: return "WidthMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::UnknownClassInTest: return "UnknownClassInTest";
    case ErrorCode::GeneUniverseMismatch: return "GeneUniverseMismatch";
    case ErrorCode::ScheduleExceedsGeneCount: return "ScheduleExceedsGeneCount";
    case ErrorCode::DatasetMismatch: return "DatasetMismatch";
  }
  return "Unknown";
}

}  // namespace expressml
