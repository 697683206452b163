#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace riskhjb {

enum class ErrorCode {
  DimensionMismatch,
  EllipticityViolation,
  SimultaneousJump,
  EmptyConstraintInterior,
  InfeasibleControl,
  InfeasibleProblem,
  NonConvergence,
  StabilityViolation,
  NonPositiveValue,
  BlowUp,
  HashMismatch,
  ParseError,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a stable error code; every module throws this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace riskhjb
