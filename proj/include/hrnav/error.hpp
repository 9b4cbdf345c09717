#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hrnav {

enum class ErrorCode {
  // env
  RaggedRows,
  EmptyMap,
  UnknownGlyph,
  PositionInObstacle,
  EmptyViews,
  StratumUnsatisfiable,
  // reward
  NonPositiveResolution,
  FormulationMismatch,
  // hier
  Unreachable,
  ProtocolError,
  PlannerTimeout,
  ProcessExited,
  // policy
  ShapeMismatch,
  NonFiniteActivation,
  NonFiniteGradient,
  DivergenceDetected,
  // metrics
  ZeroShortestPath,
  EmptyResultSet,
  // annot
  MalformedLine,
  NonContinuousIndices,
  DuplicateIndex,
  JudgeUnavailable,
  IntervalGap,
  WindowNonPositive,
  // cli / io
  InvalidConfig,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Every library failure surfaces as an Error carrying a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hrnav
