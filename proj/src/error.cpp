#include "rsteer/error.hpp"

namespace rsteer {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InfeasibleWorld: return "InfeasibleWorld";
    case ErrorCode::LayerOutOfRange: return "LayerOutOfRange";
    case ErrorCode::Divergence: return "Divergence";
    case ErrorCode::MalformedCheckpoint: return "MalformedCheckpoint";
    case ErrorCode::DegenerateDirection: return "DegenerateDirection";
    case ErrorCode::MalformedDirection: return "MalformedDirection";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::RankZero: return "RankZero";
    case ErrorCode::PerplexityInfeasible: return "PerplexityInfeasible";
    case ErrorCode::SingleCluster: return "SingleCluster";
    case ErrorCode::MissingQueryType: return "MissingQueryType";
    case ErrorCode::MismatchedTables: return "MismatchedTables";
    case ErrorCode::JudgeUnavailable: return "JudgeUnavailable";
    case ErrorCode::UnparseableVerdict: return "UnparseableVerdict";
    case ErrorCode::Exists: return "Exists";
    case ErrorCode::Usage: return "Usage";
  }
  return "Unknown";
}

Error::Error(std::string_view module, ErrorCode code, const std::string& message)
    : std::runtime_error(message), module_(module), code_(code) {}

}  // namespace rsteer
