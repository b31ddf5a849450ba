#include "gazekit/error.hpp"

namespace gazekit {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateLandmarks: return "DegenerateLandmarks";
    case ErrorKind::PoseDivergence: return "PoseDivergence";
    case ErrorKind::BehindCamera: return "BehindCamera";
    case ErrorKind::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorKind::RollResidual: return "RollResidual";
    case ErrorKind::OutOfHemisphere: return "OutOfHemisphere";
    case ErrorKind::CoincidentPoints: return "CoincidentPoints";
    case ErrorKind::OpposedDirections: return "OpposedDirections";
    case ErrorKind::SingularWarp: return "SingularWarp";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::EmptyOutput: return "EmptyOutput";
    case ErrorKind::EmptyArchive: return "EmptyArchive";
    case ErrorKind::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::TooFewPersons: return "TooFewPersons";
    case ErrorKind::InsufficientBins: return "InsufficientBins";
    case ErrorKind::NoPairedSamples: return "NoPairedSamples";
    case ErrorKind::OutOfRangeGaze: return "OutOfRangeGaze";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::IoError: return "IoError";
  }
  return "Error";
}

bool is_validation_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ParseError:
    case ErrorKind::ValidationError:
    case ErrorKind::EmptyInput:
    case ErrorKind::EmptyArchive:
    case ErrorKind::EmptyTrainingSet:
    case ErrorKind::TooFewPersons:
    case ErrorKind::NoPairedSamples:
    case ErrorKind::InvalidArgument:
      return true;
    default:
      return false;
  }
}

}  // namespace gazekit
