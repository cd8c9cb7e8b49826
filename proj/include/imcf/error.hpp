#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace imcf {

enum class ErrorKind {
  InvalidArgument,
  DegenerateShape,
  DegenerateMesh,
  CurvatureCollapse,
  StarShapeLoss,
  NumericalBlowup,
  SolverFailure,
  DegenerateSpectrum,
  HypothesisViolation,
  InsufficientData,
  DataError,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

// Every failure in the library is reported through this one exception type;
// callers branch on kind() rather than on a class hierarchy.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace imcf
