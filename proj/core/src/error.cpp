#include "voxelpaint/error.hpp"

namespace voxelpaint {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kMissingInput: return "missing-input";
    case ErrorCode::kBadHeaderSize: return "bad-header-size";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kMalformed: return "malformed";
    case ErrorCode::kUnsupportedDatatype: return "unsupported-datatype";
    case ErrorCode::kDimMismatch: return "dim-mismatch";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kVersionMismatch: return "version-mismatch";
    case ErrorCode::kNameMismatch: return "name-mismatch";
    case ErrorCode::kPlacementFailure: return "placement-failure";
    case ErrorCode::kNumericFailure: return "numeric-failure";
    case ErrorCode::kConfig: return "config";
  }
  return "unknown";
}

}  // namespace voxelpaint
