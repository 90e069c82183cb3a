#include "wvalab/error.hpp"

namespace wvalab {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::InvalidDimension: return "invalid-dimension";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::TruncationInadequate: return "truncation-inadequate";
    case ErrorKind::NonHermitianGenerator: return "non-hermitian-generator";
    case ErrorKind::GridTooNarrow: return "grid-too-narrow";
    case ErrorKind::OrthogonalSelection: return "orthogonal-selection";
    case ErrorKind::ZeroProbability: return "zero-probability";
    case ErrorKind::UnachievableWeakValue: return "unachievable-weak-value";
    case ErrorKind::DegeneratePreselection: return "degenerate-preselection";
    case ErrorKind::CommutatorVanishes: return "commutator-vanishes";
    case ErrorKind::DerivativeUnconverged: return "derivative-unconverged";
    case ErrorKind::WeakCouplingViolated: return "weak-coupling-violated";
    case ErrorKind::ZeroSlope: return "zero-slope";
    case ErrorKind::MaximumOnBoundary: return "maximum-on-boundary";
    case ErrorKind::ConfigParse: return "config-parse-error";
  }
  return "unknown";
}

bool is_physics_domain(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigParse:
    case ErrorKind::InvalidArgument:
    case ErrorKind::InvalidDimension:
    case ErrorKind::DimensionMismatch:
      return false;
    default:
      return true;
  }
}

}  // namespace wvalab
