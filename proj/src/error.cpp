#include "riskhjb/error.hpp"

namespace riskhjb {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EllipticityViolation: return "EllipticityViolation";
    case ErrorCode::SimultaneousJump: return "SimultaneousJump";
    case ErrorCode::EmptyConstraintInterior: return "EmptyConstraintInterior";
    case ErrorCode::InfeasibleControl: return "InfeasibleControl";
    case ErrorCode::InfeasibleProblem: return "InfeasibleProblem";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::StabilityViolation: return "StabilityViolation";
    case ErrorCode::NonPositiveValue: return "NonPositiveValue";
    case ErrorCode::BlowUp: return "BlowUp";
    case ErrorCode::HashMismatch: return "HashMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace riskhjb
