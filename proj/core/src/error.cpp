#include "pcapce/error.hpp"

namespace pcapce {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::DegenerateTarget: return "DegenerateTarget";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::AllModelsDegenerate: return "AllModelsDegenerate";
    case ErrorCode::OutOfSupport: return "OutOfSupport";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::InvalidInit: return "InvalidInit";
    case ErrorCode::EmptyChain: return "EmptyChain";
    case ErrorCode::EmptySamples: return "EmptySamples";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::SchemaInvalid: return "SchemaInvalid";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateData:
    case ErrorCode::DegenerateTarget:
    case ErrorCode::RankDeficient:
    case ErrorCode::AllModelsDegenerate:
    case ErrorCode::SingularSystem:
    case ErrorCode::NoConvergence:
    case ErrorCode::InvalidInit:
    case ErrorCode::EmptyChain:
    case ErrorCode::EmptySamples:
      return true;
    default:
      return false;
  }
}

}  // namespace pcapce
