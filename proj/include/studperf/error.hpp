#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace studperf {

enum class ErrorKind {
  // ingestion
  EmptyInput,
  MalformedRow,
  UnknownCategory,
  GradeOutOfRange,
  UnknownColumn,
  LeakageDetected,
  RatioOutOfRange,
  DatasetTooSmall,
  // statistics
  TooFewSamples,
  ConstantColumn,
  ConstantInput,
  LengthMismatch,
  TooFewRows,
  UnknownTarget,
  KTooLarge,
  // network
  EmptySpec,
  IncompatibleWidths,
  ShapeMismatch,
  NonFiniteInput,
  StaleCache,
  NonPositiveLearningRate,
  VersionMismatch,
  CorruptPayload,
  // training
  EmptyTrainingSet,
  EmptyTestSet,
  EmptyHistory,
  WidthMismatch,
  InvalidConfig,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::UnknownCategory: return "UnknownCategory";
    case ErrorKind::GradeOutOfRange: return "GradeOutOfRange";
    case ErrorKind::UnknownColumn: return "UnknownColumn";
    case ErrorKind::LeakageDetected: return "LeakageDetected";
    case ErrorKind::RatioOutOfRange: return "RatioOutOfRange";
    case ErrorKind::DatasetTooSmall: return "DatasetTooSmall";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::ConstantColumn: return "ConstantColumn";
    case ErrorKind::ConstantInput: return "ConstantInput";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::TooFewRows: return "TooFewRows";
    case ErrorKind::UnknownTarget: return "UnknownTarget";
    case ErrorKind::KTooLarge: return "KTooLarge";
    case ErrorKind::EmptySpec: return "EmptySpec";
    case ErrorKind::IncompatibleWidths: return "IncompatibleWidths";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::StaleCache: return "StaleCache";
    case ErrorKind::NonPositiveLearningRate: return "NonPositiveLearningRate";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::CorruptPayload: return "CorruptPayload";
    case ErrorKind::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorKind::EmptyTestSet: return "EmptyTestSet";
    case ErrorKind::EmptyHistory: return "EmptyHistory";
    case ErrorKind::WidthMismatch: return "WidthMismatch";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace studperf
