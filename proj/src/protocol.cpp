#include "wvalab/protocol.hpp"

#include <cmath>
#include <iostream>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "wvalab/error.hpp"

namespace wvalab::protocol {

namespace {

void require_system_dim(int a, int b, const char* what) {
  if (a != b) {
    std::ostringstream os;
    os << what << ": system dimension mismatch (" << a << " vs " << b << ")";
    throw Error(ErrorKind::DimensionMismatch, os.str());
  }
}

void check_weak_coupling(double strength, const char* what) {
  if (strength >= 1.0) {
    std::ostringstream os;
    os << what << ": g|A_w| = " << strength << " is outside the weak-coupling regime";
    throw Error(ErrorKind::WeakCouplingViolated, os.str());
  }
  if (strength >= 0.1) {
    std::clog << "warning: " << what << ": g|A_w| = " << strength
              << ", first-order expansion is unreliable\n";
  }
}

}  // namespace

SystemState SystemState::from_amplitudes(CVector amplitudes) {
  if (amplitudes.size() < 2) {
    throw Error(ErrorKind::InvalidDimension, "system dimension must be >= 2");
  }
  if (std::abs(amplitudes.squaredNorm() - 1.0) > 1e-12) {
    throw Error(ErrorKind::InvalidArgument, "system state is not normalized");
  }
  return SystemState(std::move(amplitudes));
}

SystemState SystemState::normalized(CVector amplitudes) {
  if (amplitudes.size() < 2) {
    throw Error(ErrorKind::InvalidDimension, "system dimension must be >= 2");
  }
  const double n = amplitudes.norm();
  if (!(n > 1e-150)) throw Error(ErrorKind::InvalidArgument, "system state vector is null");
  amplitudes /= n;
  return SystemState(std::move(amplitudes));
}

SystemState SystemState::basis(int index, int dim) {
  if (dim < 2 || index < 0 || index >= dim) {
    throw Error(ErrorKind::InvalidDimension, "basis index outside the system space");
  }
  CVector c = CVector::Zero(dim);
  c[index] = 1.0;
  return SystemState(std::move(c));
}

SystemState SystemState::plus() {
  CVector c(2);
  c << 1.0 / std::numbers::sqrt2, 1.0 / std::numbers::sqrt2;
  return SystemState(std::move(c));
}

Complex overlap(const SystemState& bra, const SystemState& ket) {
  require_system_dim(bra.dim(), ket.dim(), "overlap");
  return bra.amplitudes().dot(ket.amplitudes());
}

SystemObservable::SystemObservable(CMatrix matrix) : matrix_(std::move(matrix)) {
  if (matrix_.rows() != matrix_.cols() || matrix_.rows() < 2) {
    throw Error(ErrorKind::InvalidDimension, "observable must be a square matrix of size >= 2");
  }
  const double scale = std::max(1.0, matrix_.cwiseAbs().maxCoeff());
  if ((matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorKind::InvalidArgument, "observable is not hermitian");
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(0.5 * (matrix_ + matrix_.adjoint()));
  eigenvalues_ = solver.eigenvalues();
  eigenvectors_ = solver.eigenvectors();
  const CMatrix rebuilt =
      eigenvectors_ * eigenvalues_.cast<Complex>().asDiagonal() * eigenvectors_.adjoint();
  if ((rebuilt - matrix_).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw Error(ErrorKind::InvalidArgument, "observable eigendecomposition is inaccurate");
  }
}

SystemObservable SystemObservable::sigma_z() {
  CMatrix z = CMatrix::Zero(2, 2);
  z(0, 0) = 1.0;
  z(1, 1) = -1.0;
  return SystemObservable(std::move(z));
}

double SystemObservable::max_abs_eigenvalue() const { return eigenvalues_.cwiseAbs().maxCoeff(); }

double SystemObservable::mean(const SystemState& state) const {
  require_system_dim(dim(), state.dim(), "observable mean");
  return state.amplitudes().dot(matrix_ * state.amplitudes()).real();
}

double SystemObservable::second_moment(const SystemState& state) const {
  require_system_dim(dim(), state.dim(), "observable second moment");
  return (matrix_ * state.amplitudes()).squaredNorm();
}

double SystemObservable::variance(const SystemState& state) const {
  const double m = mean(state);
  return std::max(0.0, second_moment(state) - m * m);
}

JointState::JointState(int system_dim, int pointer_dim, CVector amplitudes)
    : system_dim_(system_dim), pointer_dim_(pointer_dim), amplitudes_(std::move(amplitudes)) {
  if (amplitudes_.size() != static_cast<Eigen::Index>(system_dim) * pointer_dim) {
    throw Error(ErrorKind::DimensionMismatch, "joint amplitudes do not match d * dim");
  }
}

Complex weak_value(const SystemState& pre, const SystemState& post, const SystemObservable& a) {
  require_system_dim(pre.dim(), a.dim(), "weak_value");
  const Complex denom = overlap(post, pre);
  if (std::abs(denom) <= kOrthogonalOverlap) {
    std::ostringstream os;
    os << "pre- and postselected states are orthogonal (|<post|pre>| = " << std::abs(denom)
       << ")";
    throw Error(ErrorKind::OrthogonalSelection, os.str());
  }
  return post.amplitudes().dot(a.matrix() * pre.amplitudes()) / denom;
}

JointState evolve_joint(const SystemState& pre, const fock::PointerState& pointer, double g,
                        const SystemObservable& a, const fock::Propagator& omega) {
  require_system_dim(pre.dim(), a.dim(), "evolve_joint");
  if (pointer.dim() != omega.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "evolve_joint: pointer/generator dimension mismatch");
  }
  const int d = pre.dim();
  const int dim = pointer.dim();
  const auto& lambda = a.eigenvalues();
  const auto& vecs = a.eigenvectors();
  const double tol = 1e-12 * std::max(1.0, a.max_abs_eigenvalue());

  CVector joint = CVector::Zero(static_cast<Eigen::Index>(d) * dim);
  for (int start = 0; start < d;) {
    int stop = start + 1;
    while (stop < d && lambda[stop] - lambda[start] <= tol) ++stop;
    const auto group = vecs.middleCols(start, stop - start);
    const CVector component = group * (group.adjoint() * pre.amplitudes());
    if (component.squaredNorm() > 0.0) {
      const double eig = lambda.segment(start, stop - start).mean();
      const CVector branch = omega.apply(pointer.amplitudes(), g * eig);
      for (int s = 0; s < d; ++s) {
        joint.segment(static_cast<Eigen::Index>(s) * dim, dim) += component[s] * branch;
      }
    }
    start = stop;
  }
  return JointState(d, dim, std::move(joint));
}

JointState evolve_joint(const SystemState& pre, const fock::PointerState& pointer, double g,
                        const SystemObservable& a, const fock::PointerOperator& omega) {
  if (!omega.hermitian()) {
    throw Error(ErrorKind::NonHermitianGenerator, "coupling operator Omega must be hermitian");
  }
  return evolve_joint(pre, pointer, g, a, fock::Propagator(omega));
}

PostselectionOutcome postselect(const JointState& joint, const SystemState& post) {
  require_system_dim(joint.system_dim(), post.dim(), "postselect");
  CVector raw = CVector::Zero(joint.pointer_dim());
  for (int s = 0; s < joint.system_dim(); ++s) {
    raw += std::conj(post.amplitudes()[s]) * joint.block(s);
  }
  const double prob = raw.squaredNorm();
  if (prob < 1e-300) {
    throw Error(ErrorKind::ZeroProbability, "postselection has zero success probability");
  }
  return {fock::PointerState::normalized(std::move(raw)), prob, prob};
}

double max_success_probability(const SystemState& pre, const SystemObservable& a, Complex a_w) {
  const double mean = a.mean(pre);
  const double second = a.second_moment(pre);
  const double var = std::max(0.0, second - mean * mean);
  if (var < 1e-12) {
    if (std::abs(a_w - mean) < 1e-9 * std::max(1.0, std::abs(mean))) return 1.0;
    std::ostringstream os;
    os << "preselection is an eigenstate of A; only A_w = " << mean << " is achievable";
    throw Error(ErrorKind::UnachievableWeakValue, os.str());
  }
  return var / (second - 2.0 * mean * a_w.real() + std::norm(a_w));
}

SystemState optimal_postselection(const SystemState& pre, const SystemObservable& a,
                                  Complex a_w) {
  require_system_dim(pre.dim(), a.dim(), "optimal_postselection");
  const CVector& psi = pre.amplitudes();
  const CVector v = a.matrix() * psi - a_w * psi;
  const double vv = v.squaredNorm();
  CVector post = psi;
  if (vv > 1e-24) post -= v * (v.dot(psi) / vv);

  const double n = post.norm();
  if (n < 1e-9) {
    throw Error(ErrorKind::UnachievableWeakValue,
                "no postselection is compatible with the requested weak value");
  }
  SystemState result = SystemState::normalized(post);

  // Verify both the weak value and the first-order success probability.
  const Complex achieved = weak_value(pre, result, a);
  const double ps = std::norm(overlap(result, pre));
  const double ps_bound = max_success_probability(pre, a, a_w);
  if (std::abs(achieved - a_w) > 1e-8 * std::max(1.0, std::abs(a_w)) ||
      std::abs(ps - ps_bound) > 1e-6 * ps_bound) {
    std::ostringstream os;
    os << "postselection verification failed: A_w " << achieved << " vs " << a_w << ", P_s "
       << ps << " vs " << ps_bound;
    throw Error(ErrorKind::UnachievableWeakValue, os.str());
  }
  return result;
}

fock::DensityMatrix reduced_pointer_std(const JointState& joint) {
  const int dim = joint.pointer_dim();
  fock::DensityMatrix rho = fock::DensityMatrix::Zero(dim, dim);
  for (int s = 0; s < joint.system_dim(); ++s) {
    const CVector b = joint.block(s);
    rho.noalias() += b * b.adjoint();
  }
  return rho;
}

double first_order_shift_post(Complex a_w, const fock::PointerState& pointer,
                              const fock::PointerOperator& omega,
                              const fock::PointerOperator& readout, double g) {
  check_weak_coupling(std::abs(g) * std::abs(a_w), "first_order_shift_post");
  const double cov = fock::covariance_term(pointer, omega, readout);
  const Complex comm = fock::expectation(pointer, fock::commutator(omega, readout));
  const Complex shift = g * a_w.imag() * cov + Complex{0.0, 1.0} * g * a_w.real() * comm;
  return shift.real();
}

double first_order_shift_std(const SystemState& pre, const SystemObservable& a,
                             const fock::PointerState& pointer,
                             const fock::PointerOperator& omega,
                             const fock::PointerOperator& readout, double g) {
  const Complex comm = fock::expectation(pointer, fock::commutator(omega, readout));
  return (Complex{0.0, 1.0} * g * a.mean(pre) * comm).real();
}

double exact_shift(const fock::PointerState& pointer_final, const fock::PointerOperator& readout,
                   const fock::PointerState& pointer_initial) {
  return fock::expectation(pointer_final, readout).real() -
         fock::expectation(pointer_initial, readout).real();
}

double exact_shift(const fock::DensityMatrix& pointer_final, const fock::PointerOperator& readout,
                   const fock::PointerState& pointer_initial) {
  return fock::expectation(pointer_final, readout).real() -
         fock::expectation(pointer_initial, readout).real();
}

std::vector<SystemState> completed_basis(const SystemState& first) {
  const int d = first.dim();
  CMatrix seed = CMatrix::Identity(d, d);
  seed.col(0) = first.amplitudes();
  // Keep the remaining identity columns except the one most parallel to `first`.
  Eigen::Index skip = 0;
  first.amplitudes().cwiseAbs().maxCoeff(&skip);
  for (int c = 1, k = 0; c < d; ++k) {
    if (k == skip) continue;
    seed.col(c++) = CVector::Unit(d, k);
  }
  const Eigen::HouseholderQR<CMatrix> qr(seed);
  const CMatrix q = qr.householderQ();
  std::vector<SystemState> out;
  out.reserve(d);
  out.push_back(first);
  for (int c = 1; c < d; ++c) out.push_back(SystemState::normalized(q.col(c)));
  return out;
}

}  // namespace wvalab::protocol
