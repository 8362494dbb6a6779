#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cpmi {

enum class ErrorCode {
  // textseq
  EmptyPart,
  SeparatorInText,
  // llprovider
  EmptySequence,
  EmptyBatch,
  EmptyCorpus,
  FixtureMiss,
  RemoteError,
  InvalidArgument,
  FormatError,
  UnsupportedVersion,
  // hypotheses
  ParseError,
  DuplicateDimension,
  EmptyPolaritySet,
  // dataset
  SchemaError,
  EmptyDataset,
  // stats
  LengthMismatch,
  DegenerateInput,
  TooFewSamples,
  NoOverlap,
  // io
  IoError,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // Same code, message prefixed with "<context>: ".
  Error with_context(std::string_view context) const {
    return Error(code_, std::string(context) + ": " + what());
  }

 private:
  ErrorCode code_;
};

// RemoteError carries transport details so callers can decide on retries.
class RemoteError : public Error {
 public:
  RemoteError(const std::string& message, int http_status, int attempts)
      : Error(ErrorCode::RemoteError, message),
        http_status_(http_status),
        attempts_(attempts) {}

  // 0 when no HTTP response was received.
  int http_status() const noexcept { return http_status_; }
  int attempts() const noexcept { return attempts_; }

 private:
  int http_status_;
  int attempts_;
};

}  // namespace cpmi
