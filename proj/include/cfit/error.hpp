#pragma once

#include <stdexcept>
#include <string>

namespace cfit {

enum class ErrorCode {
  TooFewImus,
  JointCountMismatch,
  SelfJoint,
  BadJointIndex,
  CyclicChain,
  DisconnectedChain,
  BadExternalIndex,
  DimensionMismatch,
  InvalidRate,
  EmptySpec,
  InvalidSpec,
  NonUniformSampling,
  TooShort,
  UnknownJoint,
  NonPositiveDt,
  SingularNormalEquations,
  SeriesTooShort,
  EmptyInput,
  ParseError,
  ConfigError,
  IoError,
  SchemaMismatch,
};

const char* toString(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(toString(code)) + ": " + what), code_(code)
  {
  }

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cfit
