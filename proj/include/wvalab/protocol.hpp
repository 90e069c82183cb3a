#pragma once

// System-pointer measurement protocol: exact joint evolution under the
// impulsive coupling g A (x) Omega, postselection, the unmeasured (standard)
// reduced pointer state, weak values and the first-order pointer shifts.

#include <vector>

#include <Eigen/Dense>

#include "wvalab/fock.hpp"

namespace wvalab::protocol {

using fock::CMatrix;
using fock::Complex;
using fock::CVector;

inline constexpr double kOrthogonalOverlap = 1e-12;

class SystemState {
 public:
  // Requires unit norm within 1e-12.
  static SystemState from_amplitudes(CVector amplitudes);
  static SystemState normalized(CVector amplitudes);
  static SystemState basis(int index, int dim);
  // (|0> + |1>)/sqrt(2)
  static SystemState plus();

  int dim() const { return static_cast<int>(amplitudes_.size()); }
  const CVector& amplitudes() const { return amplitudes_; }

 private:
  explicit SystemState(CVector amplitudes) : amplitudes_(std::move(amplitudes)) {}
  CVector amplitudes_;
};

Complex overlap(const SystemState& bra, const SystemState& ket);

class SystemObservable {
 public:
  explicit SystemObservable(CMatrix matrix);
  static SystemObservable sigma_z();

  int dim() const { return static_cast<int>(matrix_.rows()); }
  const CMatrix& matrix() const { return matrix_; }
  // Ascending.
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const CMatrix& eigenvectors() const { return eigenvectors_; }
  // Largest |eigenvalue|: the best signal a preselection can produce.
  double max_abs_eigenvalue() const;

  double mean(const SystemState& state) const;
  double second_moment(const SystemState& state) const;
  double variance(const SystemState& state) const;

 private:
  CMatrix matrix_;
  Eigen::VectorXd eigenvalues_;
  CMatrix eigenvectors_;
};

// Joint amplitudes, system index major: index = s * pointer_dim + n.
class JointState {
 public:
  JointState(int system_dim, int pointer_dim, CVector amplitudes);

  int system_dim() const { return system_dim_; }
  int pointer_dim() const { return pointer_dim_; }
  const CVector& amplitudes() const { return amplitudes_; }
  // Pointer amplitudes attached to system basis state |s>.
  Eigen::VectorBlock<const CVector> block(int s) const {
    return amplitudes_.segment(static_cast<Eigen::Index>(s) * pointer_dim_, pointer_dim_);
  }

 private:
  int system_dim_;
  int pointer_dim_;
  CVector amplitudes_;
};

struct PostselectionOutcome {
  fock::PointerState pointer;  // normalized
  double prob;                 // exact success probability
  double raw_norm2;            // squared norm of <post|joint> before normalization
};

// <post|A|pre> / <post|pre>
Complex weak_value(const SystemState& pre, const SystemState& post, const SystemObservable& a);

// sum_k P_k|pre> (x) exp(-i g lambda_k Omega)|pointer>, with degenerate
// eigenvalues sharing a branch. No small-g expansion.
JointState evolve_joint(const SystemState& pre, const fock::PointerState& pointer, double g,
                        const SystemObservable& a, const fock::Propagator& omega);
JointState evolve_joint(const SystemState& pre, const fock::PointerState& pointer, double g,
                        const SystemObservable& a, const fock::PointerOperator& omega);

PostselectionOutcome postselect(const JointState& joint, const SystemState& post);

// Largest first-order postselection probability compatible with weak value
// a_w: Var(A) / (<A^2> - 2<A> Re a_w + |a_w|^2). Returns 1 when pre is an
// eigenstate and a_w equals its eigenvalue; throws UnachievableWeakValue for
// any other a_w on an eigenstate.
double max_success_probability(const SystemState& pre, const SystemObservable& a, Complex a_w);

// Postselection attaining max_success_probability for the given weak value:
// the normalized projection of pre onto the complement of (A - a_w)|pre>.
SystemState optimal_postselection(const SystemState& pre, const SystemObservable& a,
                                  Complex a_w);

// Partial trace over the system.
fock::DensityMatrix reduced_pointer_std(const JointState& joint);

// First-order shift of <M> after postselection with weak value a_w.
double first_order_shift_post(Complex a_w, const fock::PointerState& pointer,
                              const fock::PointerOperator& omega,
                              const fock::PointerOperator& readout, double g);

// First-order shift of <M> without postselection: i g <A> <[Omega, M]>.
double first_order_shift_std(const SystemState& pre, const SystemObservable& a,
                             const fock::PointerState& pointer,
                             const fock::PointerOperator& omega,
                             const fock::PointerOperator& readout, double g);

double exact_shift(const fock::PointerState& pointer_final, const fock::PointerOperator& readout,
                   const fock::PointerState& pointer_initial);
double exact_shift(const fock::DensityMatrix& pointer_final, const fock::PointerOperator& readout,
                   const fock::PointerState& pointer_initial);

// Orthonormal basis of the system space whose first element is `first`.
std::vector<SystemState> completed_basis(const SystemState& first);

}  // namespace wvalab::protocol
