#pragma once

#include <stdexcept>
#include <string>

namespace gazekit {

enum class ErrorKind {
  DegenerateLandmarks,
  PoseDivergence,
  BehindCamera,
  DegenerateGeometry,
  RollResidual,
  OutOfHemisphere,
  CoincidentPoints,
  OpposedDirections,
  SingularWarp,
  ParseError,
  ValidationError,
  EmptyInput,
  EmptyOutput,
  EmptyArchive,
  EmptyTrainingSet,
  ShapeMismatch,
  NonFiniteLoss,
  SingularSystem,
  TooFewPersons,
  InsufficientBins,
  NoPairedSamples,
  OutOfRangeGaze,
  InvalidArgument,
  IoError,
};

const char* error_kind_name(ErrorKind kind);

/// Errors caused by bad user input (bad files, bad flags); CLI maps these to exit 1.
bool is_validation_error(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace gazekit
