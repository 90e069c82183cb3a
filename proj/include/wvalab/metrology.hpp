#pragma once

// Closed-form signal-to-noise and Fisher-information quantities for
// postselected and standard weak measurements, their optimizers over the
// weak value, and finite-difference Fisher-information oracles.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "wvalab/fock.hpp"
#include "wvalab/protocol.hpp"

namespace wvalab::metrology {

using fock::Complex;
using fock::PointerOperator;
using fock::PointerState;
using protocol::SystemObservable;
using protocol::SystemState;

struct SnrConfig {
  double g;
  std::int64_t N;
  SystemState pre;
  SystemObservable a;
  PointerState pointer;
  PointerOperator omega;
  PointerOperator readout;
};

// Throws InvalidArgument unless g > 0 and N >= 1; DimensionMismatch on
// inconsistent dimensions.
void validate(const SnrConfig& cfg);

struct PointerMoments {
  double mean_omega;
  double mean_readout;
  double var_omega;
  double var_readout;
  double covariance;  // <{Omega,M}> - 2<Omega><M>
  double kappa;       // i<[Omega,M]>, real for hermitian Omega, M
};

PointerMoments pointer_moments(const PointerState& pointer, const PointerOperator& omega,
                               const PointerOperator& readout);

struct SystemMoments {
  double mean;
  double second;
  double variance;
  double max_abs_eigenvalue;
};

SystemMoments system_moments(const SystemState& pre, const SystemObservable& a);

struct OptSnrReport {
  double max_snr;
  Complex optimal_Aw;
  double phi;
  double eta;
  double upper_bound;
};

struct QfiReport {
  double f_post;
  double f_post_max;
  double f_std;
  std::optional<double> ratio;  // empty when <A> = 0
  double f_all_probe;
};

// Moments are computed once; every query below is O(1). Free functions of the
// same names build one of these per call.
class SnrModel {
 public:
  explicit SnrModel(const SnrConfig& cfg);

  const PointerMoments& pointer() const { return pm_; }
  const SystemMoments& system() const { return sm_; }

  // First-order shift of <M> for weak value a_w: g (Im a_w C + Re a_w kappa).
  double shift(Complex a_w) const;
  // Signed SNR at the largest success probability compatible with a_w.
  double snr_post(Complex a_w) const;
  // Signed SNR with a given success probability.
  double snr_post(Complex a_w, double ps) const;
  OptSnrReport max_snr_post() const;
  double max_snr_std() const;
  double ratio_s_optimal() const;
  double ratio_s_fixed_weak_value(Complex a_w) const;
  double qfi_post_first_order(Complex a_w, double ps) const;
  double max_qfi_post() const;
  double qfi_std() const;

 private:
  double g_;
  double n_;
  PointerMoments pm_;
  SystemMoments sm_;
};

double snr_post(const SnrConfig& cfg, Complex a_w);
// Success probability taken from exact postselection of the evolved joint
// state onto `post`; the shift uses the weak value of (pre, post).
double snr_post_exact(const SnrConfig& cfg, const SystemState& post);
OptSnrReport max_snr_post(const SnrConfig& cfg);
double max_snr_std(const SnrConfig& cfg);
double ratio_s_optimal(const SnrConfig& cfg);
double ratio_s_fixed_weak_value(const SnrConfig& cfg, Complex a_w);

// 1 + C^2 / kappa^2; throws CommutatorVanishes when kappa is zero.
double csc2_phi(const PointerState& pointer, const PointerOperator& omega,
                const PointerOperator& readout);

double qfi_post_first_order(const SnrConfig& cfg, Complex a_w, double ps);
double max_qfi_post(const SystemState& pre, const SystemObservable& a,
                    const PointerOperator& omega, const PointerState& pointer);
double qfi_std(const SystemState& pre, const SystemObservable& a, const PointerOperator& omega,
               const PointerState& pointer);

using StateFamily = std::function<PointerState(double)>;
using DensityFamily = std::function<std::vector<double>(double)>;

// max(1e-6, g0/100)
double default_step(double g0);

// Pure-state QFI 4(<d psi|d psi> - |<psi|d psi>|^2) by central differences at
// dg and dg/2; returns the Richardson extrapolation of the two, or throws
// DerivativeUnconverged when they disagree by more than 1e-4 relative.
double qfi_numeric(const StateFamily& family, double g0, std::optional<double> dg = {});

// Classical Fisher information of a density family on `grid`, over the
// points where the density at g0 exceeds 1e-14.
double classical_fisher_p(const DensityFamily& family, const fock::QuadratureGrid& grid, double g0,
                          std::optional<double> dg = {});

// Fisher information retained when every postselection outcome is kept: the
// system is measured in an orthonormal basis whose first element is `post`
// and each pointer branch is read optimally. Evaluated at g0 = cfg.g.
double fisher_all_probe(const SnrConfig& cfg, const SystemState& post);

// f_post and f_all_probe refer to `post`.
QfiReport qfi_report(const SnrConfig& cfg, const SystemState& post);

}  // namespace wvalab::metrology
