#pragma once

#include <stdexcept>
#include <string>

namespace anterial {

// Domain error codes surfaced through the CLI as machine-readable strings.
enum class ErrorCode {
  DuplicateEdge,
  SelfLoop,
  UnknownNode,
  DuplicateLabel,
  NotChainMixed,
  NotChainConnected,
  NotAnterial,
  NotChainConnectedAnterial,
  NotDag,
  InvalidOrder,
  NonAnterialResult,
  OverlappingSets,
  InvalidQuery,
  GraphTooLarge,
  NodeSetMismatch,
  SingularCovariance,
  InvalidModel,
  MissingValues,
  TooFewSamples,
  ConstantColumn,
  LabelMismatch,
  InvalidProblem,
  SetValuedTreatment,
  TooLargeForExactCheck,
  IoError,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::DuplicateEdge: return "DuplicateEdge";
    case ErrorCode::SelfLoop: return "SelfLoop";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::DuplicateLabel: return "DuplicateLabel";
    case ErrorCode::NotChainMixed: return "NotChainMixed";
    case ErrorCode::NotChainConnected: return "NotChainConnected";
    case ErrorCode::NotAnterial: return "NotAnterial";
    case ErrorCode::NotChainConnectedAnterial: return "NotChainConnectedAnterial";
    case ErrorCode::NotDag: return "NotDag";
    case ErrorCode::InvalidOrder: return "InvalidOrder";
    case ErrorCode::NonAnterialResult: return "NonAnterialResult";
    case ErrorCode::OverlappingSets: return "OverlappingSets";
    case ErrorCode::InvalidQuery: return "InvalidQuery";
    case ErrorCode::GraphTooLarge: return "GraphTooLarge";
    case ErrorCode::NodeSetMismatch: return "NodeSetMismatch";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::MissingValues: return "MissingValues";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::ConstantColumn: return "ConstantColumn";
    case ErrorCode::LabelMismatch: return "LabelMismatch";
    case ErrorCode::InvalidProblem: return "InvalidProblem";
    case ErrorCode::SetValuedTreatment: return "SetValuedTreatment";
    case ErrorCode::TooLargeForExactCheck: return "TooLargeForExactCheck";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace anterial
