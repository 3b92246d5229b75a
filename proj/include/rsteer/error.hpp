#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rsteer {

/// Error codes shared by every module. The CLI maps each code to an exit
/// status and prints it as `module.Code` on failure.
enum class ErrorCode {
  // core / dump format
  BadMagic,
  UnsupportedVersion,
  TruncatedFile,
  DimensionMismatch,
  InvalidArgument,
  InvariantViolation,
  IoError,
  // toy model
  InfeasibleWorld,
  LayerOutOfRange,
  Divergence,
  MalformedCheckpoint,
  // steering
  DegenerateDirection,
  MalformedDirection,
  // probe
  SingleClass,
  // embed
  RankZero,
  PerplexityInfeasible,
  SingleCluster,
  // corpus / judge
  MissingQueryType,
  MismatchedTables,
  JudgeUnavailable,
  UnparseableVerdict,
  // cli
  Exists,
  Usage,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a module name and a stable error code.
class Error : public std::runtime_error {
 public:
  Error(std::string_view module, ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
  ErrorCode code_;
};

}  // namespace rsteer
