#include "modt/error.hpp"

namespace modt {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::UnparsableNumeric: return "UnparsableNumeric";
    case ErrorKind::EmptyFile: return "EmptyFile";
    case ErrorKind::InvalidSchema: return "InvalidSchema";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::DegenerateSplit: return "DegenerateSplit";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::WidthMismatch: return "WidthMismatch";
    case ErrorKind::BadFeatureIndex: return "BadFeatureIndex";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::TooFewFeatures: return "TooFewFeatures";
    case ErrorKind::BadManualPair: return "BadManualPair";
    case ErrorKind::AllWeightsZero: return "AllWeightsZero";
    case ErrorKind::ZeroMass: return "ZeroMass";
    case ErrorKind::DegenerateExpert: return "DegenerateExpert";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::NotTwoDGate: return "NotTwoDGate";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::CorruptFile: return "CorruptFile";
  }
  return "Unknown";
}

ErrorClass error_class(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::AllWeightsZero:
    case ErrorKind::ZeroMass:
    case ErrorKind::DegenerateExpert:
      return ErrorClass::Training;
    case ErrorKind::InvalidConfig:
    case ErrorKind::NotTwoDGate:
      return ErrorClass::Usage;
    case ErrorKind::IoError:
    case ErrorKind::VersionMismatch:
    case ErrorKind::CorruptFile:
      return ErrorClass::Io;
    default:
      return ErrorClass::Data;
  }
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace modt
