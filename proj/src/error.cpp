#include "darkcool/error.hpp"

namespace darkcool {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateNullSpace: return "DegenerateNullSpace";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::StepFailure: return "StepFailure";
    case ErrorCode::NullSpaceMismatch: return "NullSpaceMismatch";
    case ErrorCode::PoorFit: return "PoorFit";
    case ErrorCode::NoCrossing: return "NoCrossing";
    case ErrorCode::PoleAtTrapFrequency: return "PoleAtTrapFrequency";
    case ErrorCode::StepRuleViolation: return "StepRuleViolation";
    case ErrorCode::DimensionCap: return "DimensionCap";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::RangeInvalid: return "RangeInvalid";
    case ErrorCode::AxisLimit: return "AxisLimit";
    }
    return "Unknown";
}

} // namespace darkcool
