#include "imcf/error.hpp"

namespace imcf {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::DegenerateShape: return "degenerate-shape";
    case ErrorKind::DegenerateMesh: return "degenerate-mesh";
    case ErrorKind::CurvatureCollapse: return "curvature-collapse";
    case ErrorKind::StarShapeLoss: return "star-shape-loss";
    case ErrorKind::NumericalBlowup: return "numerical-blowup";
    case ErrorKind::SolverFailure: return "solver-failure";
    case ErrorKind::DegenerateSpectrum: return "degenerate-spectrum";
    case ErrorKind::HypothesisViolation: return "hypothesis-violation";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::DataError: return "data-error";
    case ErrorKind::ConfigError: return "config-error";
    case ErrorKind::IoError: return "io-error";
  }
  return "unknown";
}

}  // namespace imcf
