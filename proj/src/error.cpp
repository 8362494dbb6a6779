#include "cpmi/error.hpp"

namespace cpmi {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyPart: return "EmptyPart";
    case ErrorCode::SeparatorInText: return "SeparatorInText";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::FixtureMiss: return "FixtureMiss";
    case ErrorCode::RemoteError: return "RemoteError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateDimension: return "DuplicateDimension";
    case ErrorCode::EmptyPolaritySet: return "EmptyPolaritySet";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace cpmi
