#pragma once

#include <stdexcept>
#include <string>

namespace modt {

enum class ErrorKind {
  // data
  MissingColumn,
  UnparsableNumeric,
  EmptyFile,
  InvalidSchema,
  UnknownLabel,
  DegenerateSplit,
  EmptyInput,
  WidthMismatch,
  BadFeatureIndex,
  NonFiniteInput,
  TooFewFeatures,
  BadManualPair,
  // training
  AllWeightsZero,
  ZeroMass,
  DegenerateExpert,
  // usage
  InvalidConfig,
  NotTwoDGate,
  // io
  IoError,
  VersionMismatch,
  CorruptFile,
};

/// Coarse grouping used by the command line for exit codes.
enum class ErrorClass { Usage = 2, Data = 3, Training = 4, Io = 5 };

const char* to_string(ErrorKind kind) noexcept;
ErrorClass error_class(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace modt
