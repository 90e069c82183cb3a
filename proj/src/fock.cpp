#include "wvalab/fock.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "wvalab/error.hpp"

namespace wvalab::fock {

namespace {

void require_dim(int dim) {
  if (dim < 2) {
    throw Error(ErrorKind::InvalidDimension,
                "truncation dimension must be >= 2, got " + std::to_string(dim));
  }
}

void require_same_dim(int a, int b, const char* what) {
  if (a != b) {
    std::ostringstream os;
    os << what << ": dimension mismatch (" << a << " vs " << b << ")";
    throw Error(ErrorKind::DimensionMismatch, os.str());
  }
}

double max_abs(const CMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

bool is_tridiagonal(const CMatrix& m) {
  const Eigen::Index n = m.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(i - j) > 1 && m(i, j) != Complex{}) return false;
    }
  }
  return true;
}

}  // namespace

double PointerState::tail_mass() const {
  const int start = std::max(0, dim() - kTailWindow);
  return amplitudes_.tail(dim() - start).squaredNorm();
}

PointerState PointerState::from_amplitudes(CVector amplitudes) {
  require_dim(static_cast<int>(amplitudes.size()));
  const double n2 = amplitudes.squaredNorm();
  if (std::abs(n2 - 1.0) > kNormTolerance) {
    std::ostringstream os;
    os << "pointer amplitudes are not normalized (norm^2 = " << n2 << ")";
    throw Error(ErrorKind::InvalidArgument, os.str());
  }
  return PointerState(std::move(amplitudes));
}

PointerState PointerState::normalized(CVector amplitudes) {
  require_dim(static_cast<int>(amplitudes.size()));
  const double n = amplitudes.norm();
  if (!(n > 1e-150)) {
    throw Error(ErrorKind::ZeroProbability, "cannot normalize a null pointer vector");
  }
  amplitudes /= n;
  return PointerState(std::move(amplitudes));
}

void require_adequate_truncation(const PointerState& state, const char* what) {
  const double tail = state.tail_mass();
  if (!(tail < kTailMassLimit)) {
    std::ostringstream os;
    os.precision(3);
    os << what << ": tail mass " << tail << " in the last " << kTailWindow
       << " Fock levels exceeds " << kTailMassLimit << " at truncation " << state.dim()
       << "; increase the truncation";
    throw Error(ErrorKind::TruncationInadequate, os.str());
  }
}

PointerState vacuum(int dim) { return number_state(0, dim); }

PointerState number_state(int n, int dim) {
  require_dim(dim);
  if (n < 0 || n >= dim) {
    throw Error(ErrorKind::InvalidDimension, "Fock level outside the truncation");
  }
  CVector c = CVector::Zero(dim);
  c[n] = 1.0;
  return PointerState::from_amplitudes(std::move(c));
}

PointerState coherent_state(Complex alpha, int dim) {
  require_dim(dim);
  if (std::norm(alpha) > dim / 4.0) {
    std::ostringstream os;
    os << "coherent state |alpha|^2 = " << std::norm(alpha) << " exceeds dim/4 = " << dim / 4.0;
    throw Error(ErrorKind::TruncationInadequate, os.str());
  }
  CVector c(dim);
  c[0] = std::exp(-0.5 * std::norm(alpha));
  for (int n = 1; n < dim; ++n) c[n] = c[n - 1] * alpha / std::sqrt(static_cast<double>(n));
  auto state = PointerState::normalized(std::move(c));
  require_adequate_truncation(state, "coherent_state");
  return state;
}

PointerState squeezed_coherent_state(Complex xi, Complex alpha, int dim) {
  const PointerState displaced = coherent_state(alpha, dim);
  if (xi == Complex{}) return displaced;
  CVector squeezed = Squeezer::for_dim(dim)->apply(xi, displaced.amplitudes());
  const double drift = std::abs(squeezed.squaredNorm() - 1.0);
  if (drift > 1e-8) {
    std::ostringstream os;
    os << "squeeze lost unitarity: norm^2 drift " << drift;
    throw Error(ErrorKind::TruncationInadequate, os.str());
  }
  auto state = PointerState::normalized(std::move(squeezed));
  require_adequate_truncation(state, "squeezed_coherent_state");
  return state;
}

PointerOperator::PointerOperator(CMatrix matrix, bool hermitian) : hermitian_(hermitian) {
  if (matrix.rows() != matrix.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "pointer operator must be square");
  }
  require_dim(static_cast<int>(matrix.rows()));
  if (hermitian_) {
    const double scale = std::max(1.0, max_abs(matrix));
    const double residual = max_abs(matrix - matrix.adjoint());
    if (residual > 1e-12 * scale) {
      std::ostringstream os;
      os << "operator flagged hermitian but max|M - M^dag| = " << residual;
      throw Error(ErrorKind::NonHermitianGenerator, os.str());
    }
  }
  matrix_ = std::make_shared<const CMatrix>(std::move(matrix));
}

PointerOperator PointerOperator::adjoint() const {
  return PointerOperator(matrix_->adjoint(), hermitian_);
}

PointerOperator operator*(const PointerOperator& lhs, const PointerOperator& rhs) {
  require_same_dim(lhs.dim(), rhs.dim(), "operator product");
  return PointerOperator(lhs.matrix() * rhs.matrix(), false);
}

PointerOperator operator+(const PointerOperator& lhs, const PointerOperator& rhs) {
  require_same_dim(lhs.dim(), rhs.dim(), "operator sum");
  return PointerOperator(lhs.matrix() + rhs.matrix(), lhs.hermitian() && rhs.hermitian());
}

PointerOperator operator-(const PointerOperator& lhs, const PointerOperator& rhs) {
  require_same_dim(lhs.dim(), rhs.dim(), "operator difference");
  return PointerOperator(lhs.matrix() - rhs.matrix(), lhs.hermitian() && rhs.hermitian());
}

PointerOperator annihilation_op(int dim) {
  require_dim(dim);
  CMatrix a = CMatrix::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return PointerOperator(std::move(a), false);
}

PointerOperator creation_op(int dim) { return annihilation_op(dim).adjoint(); }

PointerOperator number_op(int dim) {
  require_dim(dim);
  CMatrix n = CMatrix::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) n(k, k) = k;
  return PointerOperator(std::move(n), true);
}

PointerOperator identity_op(int dim) {
  require_dim(dim);
  return PointerOperator(CMatrix::Identity(dim, dim), true);
}

Quadratures quadrature_ops(int dim) {
  const CMatrix a = annihilation_op(dim).matrix();
  const CMatrix ad = a.adjoint();
  const double s = 1.0 / std::numbers::sqrt2;
  const Complex i{0.0, 1.0};
  return {PointerOperator((a + ad) * s, true), PointerOperator((a - ad) * (s / i), true)};
}

PointerOperator commutator(const PointerOperator& a, const PointerOperator& b) {
  require_same_dim(a.dim(), b.dim(), "commutator");
  return PointerOperator(a.matrix() * b.matrix() - b.matrix() * a.matrix(), false);
}

PointerOperator anticommutator(const PointerOperator& a, const PointerOperator& b) {
  require_same_dim(a.dim(), b.dim(), "anticommutator");
  CMatrix m = a.matrix() * b.matrix() + b.matrix() * a.matrix();
  const bool herm = a.hermitian() && b.hermitian();
  if (herm) m = 0.5 * (m + m.adjoint()).eval();
  return PointerOperator(std::move(m), herm);
}

Complex expectation(const PointerState& state, const PointerOperator& op) {
  require_same_dim(state.dim(), op.dim(), "expectation");
  const CVector& c = state.amplitudes();
  return c.dot(op.matrix() * c) / c.squaredNorm();
}

Complex expectation(const DensityMatrix& rho, const PointerOperator& op) {
  require_same_dim(static_cast<int>(rho.rows()), op.dim(), "expectation");
  return (rho * op.matrix()).trace() / rho.trace();
}

double variance(const PointerState& state, const PointerOperator& op) {
  const double mean = expectation(state, op).real();
  const CVector v = op.matrix() * state.amplitudes();
  return v.squaredNorm() / state.norm_squared() - mean * mean;
}

double covariance_term(const PointerState& state, const PointerOperator& a,
                       const PointerOperator& b) {
  require_same_dim(state.dim(), a.dim(), "covariance");
  require_same_dim(state.dim(), b.dim(), "covariance");
  const CVector& c = state.amplitudes();
  const CVector ac = a.matrix() * c;
  const CVector bc = b.matrix() * c;
  const double n2 = c.squaredNorm();
  // <{A,B}> = 2 Re <A c, B c> for hermitian A, B.
  const double anti = 2.0 * ac.dot(bc).real() / n2;
  const double ma = c.dot(ac).real() / n2;
  const double mb = c.dot(bc).real() / n2;
  return anti - 2.0 * ma * mb;
}

Propagator::Propagator(const PointerOperator& generator) {
  const CMatrix& h = generator.matrix();
  const double scale = std::max(1.0, max_abs(h));
  if (max_abs(h - h.adjoint()) > 1e-12 * scale) {
    throw Error(ErrorKind::NonHermitianGenerator, "evolution generator is not hermitian");
  }
  const Eigen::Index n = h.rows();
  if (is_tridiagonal(h)) {
    // Diagonal phases make a hermitian tridiagonal matrix real symmetric.
    CVector phase(n);
    phase[0] = 1.0;
    Eigen::VectorXd diag(n);
    Eigen::VectorXd sub(n - 1);
    for (Eigen::Index k = 0; k < n; ++k) diag[k] = h(k, k).real();
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
      const Complex off = h(k, k + 1);
      const double mag = std::abs(off);
      sub[k] = mag;
      phase[k + 1] = mag > 0.0 ? phase[k] * std::conj(off) / mag : phase[k];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    eigenvalues_ = solver.eigenvalues();
    eigenvectors_ = phase.asDiagonal() * solver.eigenvectors().cast<Complex>();
  } else {
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(0.5 * (h + h.adjoint()));
    eigenvalues_ = solver.eigenvalues();
    eigenvectors_ = solver.eigenvectors();
  }
}

CVector Propagator::apply(const CVector& amplitudes, double t) const {
  require_same_dim(dim(), static_cast<int>(amplitudes.size()), "propagator");
  if (t == 0.0) return amplitudes;
  CVector coeff = eigenvectors_.adjoint() * amplitudes;
  for (Eigen::Index k = 0; k < coeff.size(); ++k) {
    coeff[k] *= std::polar(1.0, -t * eigenvalues_[k]);
  }
  return eigenvectors_ * coeff;
}

PointerState Propagator::apply(const PointerState& state, double t) const {
  return PointerState::normalized(apply(state.amplitudes(), t));
}

PointerState evolve_hermitian(const PointerState& state, const PointerOperator& generator,
                              double t) {
  if (!generator.hermitian()) {
    throw Error(ErrorKind::NonHermitianGenerator, "evolve_hermitian needs a hermitian generator");
  }
  require_same_dim(state.dim(), generator.dim(), "evolve_hermitian");
  return Propagator(generator).apply(state, t);
}

QuadratureGrid QuadratureGrid::uniform(double lo, double hi, int count) {
  if (count < 2 || !(hi > lo)) {
    throw Error(ErrorKind::InvalidArgument, "quadrature grid needs count >= 2 and hi > lo");
  }
  std::vector<double> pts(count);
  const double width = hi - lo;
  for (int i = 0; i < count; ++i) pts[i] = lo + width * i / (count - 1);
  return QuadratureGrid(std::move(pts), width / (count - 1));
}

QuadratureGrid QuadratureGrid::for_dim(int dim, int count) {
  const double half = std::sqrt(2.0 * dim) + 5.0;
  return uniform(-half, half, count);
}

double QuadratureGrid::trapezoid(std::span<const double> values) const {
  if (static_cast<int>(values.size()) != size()) {
    throw Error(ErrorKind::DimensionMismatch, "trapezoid: value count does not match grid");
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  sum -= 0.5 * (values.front() + values.back());
  return sum * spacing_;
}

void hermite_functions(double x, std::span<double> out) {
  if (out.empty()) return;
  constexpr double kRescale = 1e150;
  const double log_rescale = std::log(kRescale);
  // psi_n = exp(log_scale) * v_n
  double log_scale = -0.5 * x * x - 0.25 * std::log(std::numbers::pi);
  double factor = std::exp(log_scale);
  double prev = 0.0;
  double cur = 1.0;
  out[0] = factor;
  for (std::size_t n = 1; n < out.size(); ++n) {
    const double dn = static_cast<double>(n);
    const double next = std::sqrt(2.0 / dn) * x * cur - std::sqrt((dn - 1.0) / dn) * prev;
    prev = cur;
    cur = next;
    if (std::abs(cur) > kRescale) {
      cur /= kRescale;
      prev /= kRescale;
      log_scale += log_rescale;
      factor = std::exp(log_scale);
    }
    out[n] = cur * factor;
  }
}

MomentumBasis::MomentumBasis(int dim, QuadratureGrid grid)
    : dim_(dim), grid_(std::move(grid)), table_(grid_.size(), dim) {
  require_dim(dim);
  std::vector<double> row(dim);
  const auto pts = grid_.points();
  for (int j = 0; j < grid_.size(); ++j) {
    hermite_functions(pts[j], row);
    for (int n = 0; n < dim; ++n) table_(j, n) = row[n];
  }
}

std::vector<double> MomentumBasis::density(const CVector& amplitudes) const {
  require_same_dim(dim_, static_cast<int>(amplitudes.size()), "momentum density");
  // (-i)^n cycles through 1, -i, -1, i.
  Eigen::VectorXd re(dim_);
  Eigen::VectorXd im(dim_);
  for (int n = 0; n < dim_; ++n) {
    const Complex c = amplitudes[n];
    Complex phased;
    switch (n & 3) {
      case 0: phased = c; break;
      case 1: phased = Complex{c.imag(), -c.real()}; break;
      case 2: phased = -c; break;
      default: phased = Complex{-c.imag(), c.real()}; break;
    }
    re[n] = phased.real();
    im[n] = phased.imag();
  }
  const Eigen::VectorXd amp_re = table_ * re;
  const Eigen::VectorXd amp_im = table_ * im;
  std::vector<double> rho(grid_.size());
  for (int j = 0; j < grid_.size(); ++j) rho[j] = amp_re[j] * amp_re[j] + amp_im[j] * amp_im[j];
  return rho;
}

void require_grid_coverage(const QuadratureGrid& grid, std::span<const double> density) {
  const double mass = grid.trapezoid(density);
  if (1.0 - mass > 1e-6) {
    std::ostringstream os;
    os << "quadrature grid [" << grid.lo() << ", " << grid.hi()
       << "] misses probability mass " << 1.0 - mass;
    throw Error(ErrorKind::GridTooNarrow, os.str());
  }
}

std::vector<double> wavefunction_p(const PointerState& state, const QuadratureGrid& grid) {
  const MomentumBasis basis(state.dim(), grid);
  auto rho = basis.density(state.amplitudes());
  const double n2 = state.norm_squared();
  for (double& v : rho) v /= n2;
  require_grid_coverage(grid, rho);
  return rho;
}

}  // namespace wvalab::fock
