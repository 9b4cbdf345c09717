#include "hrnav/error.hpp"

namespace hrnav {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::RaggedRows: return "RaggedRows";
    case ErrorCode::EmptyMap: return "EmptyMap";
    case ErrorCode::UnknownGlyph: return "UnknownGlyph";
    case ErrorCode::PositionInObstacle: return "PositionInObstacle";
    case ErrorCode::EmptyViews: return "EmptyViews";
    case ErrorCode::StratumUnsatisfiable: return "StratumUnsatisfiable";
    case ErrorCode::NonPositiveResolution: return "NonPositiveResolution";
    case ErrorCode::FormulationMismatch: return "FormulationMismatch";
    case ErrorCode::Unreachable: return "Unreachable";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::PlannerTimeout: return "PlannerTimeout";
    case ErrorCode::ProcessExited: return "ProcessExited";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteActivation: return "NonFiniteActivation";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::ZeroShortestPath: return "ZeroShortestPath";
    case ErrorCode::EmptyResultSet: return "EmptyResultSet";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::NonContinuousIndices: return "NonContinuousIndices";
    case ErrorCode::DuplicateIndex: return "DuplicateIndex";
    case ErrorCode::JudgeUnavailable: return "JudgeUnavailable";
    case ErrorCode::IntervalGap: return "IntervalGap";
    case ErrorCode::WindowNonPositive: return "WindowNonPositive";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace hrnav
