#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wvalab {

enum class ErrorKind {
  InvalidArgument,
  InvalidDimension,
  DimensionMismatch,
  TruncationInadequate,
  NonHermitianGenerator,
  GridTooNarrow,
  OrthogonalSelection,
  ZeroProbability,
  UnachievableWeakValue,
  DegeneratePreselection,
  CommutatorVanishes,
  DerivativeUnconverged,
  WeakCouplingViolated,
  ZeroSlope,
  MaximumOnBoundary,
  ConfigParse,
};

// Stable kebab-case name, used in CLI error reports.
std::string_view to_string(ErrorKind kind);

// True for errors that describe a physically degenerate or unreachable setup
// rather than a malformed input.
bool is_physics_domain(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace wvalab
