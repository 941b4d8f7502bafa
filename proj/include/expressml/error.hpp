#pragma once

#include <stdexcept>
#include <string>

namespace expressml {

/// Failure categories shared by every module. The C API maps these onto its
/// status codes, and the CLI maps them onto exit codes.
enum class ErrorCode {
  InvalidArgument,
  Io,
  MalformedRow,
  NonNumericScore,
  DuplicateSample,
  DuplicateCell,
  EmptyResult,
  ClassTooSmall,
  BadMagic,
  VersionMismatch,
  TruncatedFile,
  ChecksumMismatch,
  InvalidSpec,
  InvalidParams,
  EmptyNode,
  FeatureOutOfRange,
  WidthMismatch,
  LengthMismatch,
  UnknownClassInTest,
  GeneUniverseMismatch,
  ScheduleExceedsGeneCount,
  DatasetMismatch,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace expressml
