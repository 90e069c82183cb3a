#pragma once

// Truncated Fock-space numerics for a single bosonic pointer mode.
//
// Conventions (hbar = 1):
//   q = (a + a^dag)/sqrt(2),  p = (a - a^dag)/(sqrt(2) i),  [q, p] = i
//   <p|n> = (-i)^n psi_n(p), psi_n the normalized Hermite functions.
// The (-i)^n phase fixes the orientation of the momentum axis; flipping it
// mirrors p -> -p and with it the sign of every q-p covariance.

#include <complex>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace wvalab::fock {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using DensityMatrix = Eigen::MatrixXcd;

// 768 keeps the r = 2 squeezed vacuum tail below 1e-14.
inline constexpr int kDefaultTruncation = 768;
inline constexpr int kTailWindow = 8;
inline constexpr double kTailMassLimit = 1e-10;
inline constexpr double kNormTolerance = 1e-9;
inline constexpr int kDefaultGridPoints = 4096;

class PointerState {
 public:
  // Amplitudes must already be unit norm (within kNormTolerance).
  static PointerState from_amplitudes(CVector amplitudes);
  // Rescales to unit norm; throws ZeroProbability for a null vector.
  static PointerState normalized(CVector amplitudes);

  int dim() const { return static_cast<int>(amplitudes_.size()); }
  const CVector& amplitudes() const { return amplitudes_; }
  double norm_squared() const { return amplitudes_.squaredNorm(); }
  // Probability mass in the last kTailWindow Fock levels.
  double tail_mass() const;

 private:
  explicit PointerState(CVector amplitudes) : amplitudes_(std::move(amplitudes)) {}
  CVector amplitudes_;
};

// Throws TruncationInadequate when the tail mass exceeds kTailMassLimit.
void require_adequate_truncation(const PointerState& state, const char* what);

PointerState vacuum(int dim = kDefaultTruncation);
PointerState number_state(int n, int dim = kDefaultTruncation);
PointerState coherent_state(Complex alpha, int dim = kDefaultTruncation);
// exp(1/2 (xi^* a^2 - xi a^dag^2)) |alpha>, squeeze applied after displacement.
PointerState squeezed_coherent_state(Complex xi, Complex alpha, int dim = kDefaultTruncation);

class PointerOperator {
 public:
  // When `hermitian` is set the matrix is checked against its adjoint.
  PointerOperator(CMatrix matrix, bool hermitian);

  int dim() const { return static_cast<int>(matrix_->rows()); }
  const CMatrix& matrix() const { return *matrix_; }
  bool hermitian() const { return hermitian_; }

  PointerOperator adjoint() const;

 private:
  // Immutable and shared, so copies are cheap.
  std::shared_ptr<const CMatrix> matrix_;
  bool hermitian_;
};

PointerOperator operator*(const PointerOperator& lhs, const PointerOperator& rhs);
PointerOperator operator+(const PointerOperator& lhs, const PointerOperator& rhs);
PointerOperator operator-(const PointerOperator& lhs, const PointerOperator& rhs);

PointerOperator annihilation_op(int dim);
PointerOperator creation_op(int dim);
PointerOperator number_op(int dim);
PointerOperator identity_op(int dim);

struct Quadratures {
  PointerOperator q;
  PointerOperator p;
};
Quadratures quadrature_ops(int dim);

// [A, B]; never flagged hermitian.
PointerOperator commutator(const PointerOperator& a, const PointerOperator& b);
// {A, B}; hermitian when both inputs are.
PointerOperator anticommutator(const PointerOperator& a, const PointerOperator& b);

Complex expectation(const PointerState& state, const PointerOperator& op);
Complex expectation(const DensityMatrix& rho, const PointerOperator& op);
double variance(const PointerState& state, const PointerOperator& op);
// <{A,B}> - 2<A><B> for hermitian A, B.
double covariance_term(const PointerState& state, const PointerOperator& a,
                       const PointerOperator& b);

// Spectral propagator exp(-i t G) for a fixed hermitian generator G. The
// eigendecomposition is computed once; apply() is O(dim^2).
class Propagator {
 public:
  explicit Propagator(const PointerOperator& generator);

  int dim() const { return static_cast<int>(eigenvalues_.size()); }
  CVector apply(const CVector& amplitudes, double t) const;
  PointerState apply(const PointerState& state, double t) const;
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }

 private:
  Eigen::VectorXd eigenvalues_;
  CMatrix eigenvectors_;
};

PointerState evolve_hermitian(const PointerState& state, const PointerOperator& generator,
                              double t);

// Exact exponential of the truncated squeeze generator. The generator only
// couples n <-> n+2, so each parity sector is a tridiagonal problem; a phase
// rotation diag(e^{i theta n / 2}) removes arg(xi), leaving one real
// eigendecomposition per sector shared by every xi.
class Squeezer {
 public:
  explicit Squeezer(int dim);

  int dim() const { return dim_; }
  CVector apply(Complex xi, const CVector& amplitudes) const;

  // Process-wide cache; instances are immutable once built.
  static std::shared_ptr<const Squeezer> for_dim(int dim);

 private:
  struct Sector {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;
  };
  int dim_;
  Sector sectors_[2];
};

class QuadratureGrid {
 public:
  static QuadratureGrid uniform(double lo, double hi, int count);
  // +-(sqrt(2 dim) + 5), which covers the classical turning point of |dim-1>.
  static QuadratureGrid for_dim(int dim, int count = kDefaultGridPoints);

  std::span<const double> points() const { return points_; }
  int size() const { return static_cast<int>(points_.size()); }
  double spacing() const { return spacing_; }
  double lo() const { return points_.front(); }
  double hi() const { return points_.back(); }

  double trapezoid(std::span<const double> values) const;

 private:
  QuadratureGrid(std::vector<double> points, double spacing)
      : points_(std::move(points)), spacing_(spacing) {}
  std::vector<double> points_;
  double spacing_;
};

// psi_0..psi_{out.size()-1} at x by the normalized three-term recurrence,
// rescaled on the fly so that large |x| neither underflows nor overflows.
void hermite_functions(double x, std::span<double> out);

// Hermite-function table on a grid, reused across many densities.
class MomentumBasis {
 public:
  MomentumBasis(int dim, QuadratureGrid grid);

  int dim() const { return dim_; }
  const QuadratureGrid& grid() const { return grid_; }
  // |sum_n c_n (-i)^n psi_n(x)|^2 on the grid; no normalization applied.
  std::vector<double> density(const CVector& amplitudes) const;

 private:
  int dim_;
  QuadratureGrid grid_;
  Eigen::MatrixXd table_;  // points x dim
};

// Momentum probability density; throws GridTooNarrow when the trapezoid
// integral falls short of one by more than 1e-6.
std::vector<double> wavefunction_p(const PointerState& state, const QuadratureGrid& grid);

// Checks a density's normalization on its grid, same policy as wavefunction_p.
void require_grid_coverage(const QuadratureGrid& grid, std::span<const double> density);

}  // namespace wvalab::fock
