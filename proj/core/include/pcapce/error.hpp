#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pcapce {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  InsufficientSamples,
  DegenerateData,
  DegenerateTarget,
  RankDeficient,
  AllModelsDegenerate,
  OutOfSupport,
  SingularSystem,
  NoConvergence,
  InvalidInit,
  EmptyChain,
  EmptySamples,
  IoFailure,
  VersionMismatch,
  SchemaInvalid,
  ConfigInvalid,
};

std::string_view to_string(ErrorCode code);

/// True for failures of a numerical routine (as opposed to bad input or I/O).
bool is_numerical(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pcapce
