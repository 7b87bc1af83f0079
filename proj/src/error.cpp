#include <cfit/error.hpp>

namespace cfit {

const char* toString(ErrorCode code)
{
  switch (code) {
    case ErrorCode::TooFewImus: return "TooFewImus";
    case ErrorCode::JointCountMismatch: return "JointCountMismatch";
    case ErrorCode::SelfJoint: return "SelfJoint";
    case ErrorCode::BadJointIndex: return "BadJointIndex";
    case ErrorCode::CyclicChain: return "CyclicChain";
    case ErrorCode::DisconnectedChain: return "DisconnectedChain";
    case ErrorCode::BadExternalIndex: return "BadExternalIndex";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidRate: return "InvalidRate";
    case ErrorCode::EmptySpec: return "EmptySpec";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::NonUniformSampling: return "NonUniformSampling";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::UnknownJoint: return "UnknownJoint";
    case ErrorCode::NonPositiveDt: return "NonPositiveDt";
    case ErrorCode::SingularNormalEquations: return "SingularNormalEquations";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
  }
  return "Unknown";
}

}  // namespace cfit
