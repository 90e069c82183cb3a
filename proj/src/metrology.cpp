#include "wvalab/metrology.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "wvalab/error.hpp"

namespace wvalab::metrology {

namespace {

using fock::CVector;

constexpr double kCommutatorFloor = 1e-12;
constexpr double kDegenerateFloor = 1e-12;
constexpr double kRichardsonTolerance = 1e-4;
constexpr double kRichardsonFloor = 1e-8;

// Central-difference estimates at h and h/2, extrapolated.
double richardson(const std::function<double(double)>& estimate, double dg, const char* what) {
  if (!(dg > 0.0)) throw Error(ErrorKind::InvalidArgument, std::string(what) + ": dg must be > 0");
  const double coarse = estimate(dg);
  const double fine = estimate(0.5 * dg);
  const double scale = std::max({std::abs(fine), std::abs(coarse), kRichardsonFloor});
  if (!std::isfinite(coarse) || !std::isfinite(fine) ||
      std::abs(coarse - fine) > kRichardsonTolerance * scale) {
    std::ostringstream os;
    os.precision(10);
    os << what << ": step-halving estimates disagree (" << coarse << " at dg=" << dg << ", "
       << fine << " at dg/2)";
    throw Error(ErrorKind::DerivativeUnconverged, os.str());
  }
  return (4.0 * fine - coarse) / 3.0;
}

double pure_qfi(const CVector& minus, const CVector& centre, const CVector& plus, double h) {
  const CVector d = (plus - minus) / (2.0 * h);
  return 4.0 * (d.squaredNorm() - std::norm(centre.dot(d)));
}

double require_kappa(const PointerMoments& pm) {
  if (std::abs(pm.kappa) < kCommutatorFloor) {
    throw Error(ErrorKind::CommutatorVanishes, "<[Omega, M]> vanishes on the pointer state");
  }
  return pm.kappa;
}

}  // namespace

void validate(const SnrConfig& cfg) {
  if (!(cfg.g > 0.0) || !std::isfinite(cfg.g)) {
    throw Error(ErrorKind::InvalidArgument, "coupling g must be a finite positive number");
  }
  if (cfg.N < 1) throw Error(ErrorKind::InvalidArgument, "ensemble size N must be >= 1");
  if (cfg.pre.dim() != cfg.a.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "preselection and observable dimensions differ");
  }
  if (cfg.pointer.dim() != cfg.omega.dim() || cfg.pointer.dim() != cfg.readout.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "pointer and pointer operator dimensions differ");
  }
  if (!cfg.omega.hermitian() || !cfg.readout.hermitian()) {
    throw Error(ErrorKind::NonHermitianGenerator, "Omega and M must be hermitian");
  }
}

PointerMoments pointer_moments(const PointerState& pointer, const PointerOperator& omega,
                               const PointerOperator& readout) {
  if (pointer.dim() != omega.dim() || pointer.dim() != readout.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "pointer_moments: dimension mismatch");
  }
  const CVector& psi = pointer.amplitudes();
  const CVector x = omega.matrix() * psi;
  const CVector y = readout.matrix() * psi;
  const double mo = psi.dot(x).real();
  const double mm = psi.dot(y).real();
  const Complex cross = x.dot(y);  // <Omega M>
  PointerMoments pm{};
  pm.mean_omega = mo;
  pm.mean_readout = mm;
  pm.var_omega = std::max(0.0, x.squaredNorm() - mo * mo);
  pm.var_readout = std::max(0.0, y.squaredNorm() - mm * mm);
  pm.covariance = 2.0 * cross.real() - 2.0 * mo * mm;
  pm.kappa = -2.0 * cross.imag();
  return pm;
}

SystemMoments system_moments(const SystemState& pre, const SystemObservable& a) {
  const double mean = a.mean(pre);
  const double second = a.second_moment(pre);
  return {mean, second, std::max(0.0, second - mean * mean), a.max_abs_eigenvalue()};
}

SnrModel::SnrModel(const SnrConfig& cfg)
    : g_(cfg.g),
      n_(static_cast<double>(cfg.N)),
      pm_(pointer_moments(cfg.pointer, cfg.omega, cfg.readout)),
      sm_(system_moments(cfg.pre, cfg.a)) {
  validate(cfg);
  if (!(pm_.var_readout > 0.0)) {
    throw Error(ErrorKind::DegeneratePreselection, "readout variance vanishes on the pointer");
  }
}

double SnrModel::shift(Complex a_w) const {
  return g_ * (a_w.imag() * pm_.covariance + a_w.real() * pm_.kappa);
}

double SnrModel::snr_post(Complex a_w, double ps) const {
  return std::sqrt(n_ * ps) * shift(a_w) / std::sqrt(pm_.var_readout);
}

double SnrModel::snr_post(Complex a_w) const {
  if (sm_.variance < kDegenerateFloor) {
    // Eigenstate: only a_w = <A> is reachable, with certainty.
    if (std::abs(a_w - sm_.mean) > 1e-9 * std::max(1.0, std::abs(sm_.mean))) {
      throw Error(ErrorKind::UnachievableWeakValue,
                  "preselection is an eigenstate of A; only A_w = <A> is achievable");
    }
    return snr_post(a_w, 1.0);
  }
  const double ps =
      sm_.variance / (sm_.second - 2.0 * sm_.mean * a_w.real() + std::norm(a_w));
  return snr_post(a_w, ps);
}

OptSnrReport SnrModel::max_snr_post() const {
  if (sm_.variance < kDegenerateFloor) {
    throw Error(ErrorKind::DegeneratePreselection,
                "Var(A) vanishes: preselection is an eigenstate of A");
  }
  if (std::abs(sm_.mean) < kDegenerateFloor) {
    throw Error(ErrorKind::DegeneratePreselection,
                "<A> vanishes: the optimal weak value is unbounded; use a grid search");
  }
  const double kappa = require_kappa(pm_);
  const double cov = pm_.covariance;
  const double phi = std::atan2(kappa, cov);
  const double sin_phi = std::sin(phi);
  const double eta = std::sqrt(sm_.variance + sm_.mean * sm_.mean * sin_phi * sin_phi);
  const double u = std::hypot(kappa, cov);

  OptSnrReport r{};
  r.phi = phi;
  r.eta = eta;
  r.max_snr = g_ * eta * u * std::sqrt(n_ / pm_.var_readout);
  // The Cauchy-Schwarz equality point of the (shift, probability) quotient.
  r.optimal_Aw = sm_.mean + sm_.variance * Complex{kappa, cov} / (kappa * sm_.mean);
  r.upper_bound = 2.0 * g_ * eta * std::sqrt(n_ * pm_.var_omega);
  return r;
}

double SnrModel::max_snr_std() const {
  return g_ * std::sqrt(n_) * std::abs(sm_.max_abs_eigenvalue * pm_.kappa) /
         std::sqrt(pm_.var_readout);
}

double SnrModel::ratio_s_optimal() const {
  const double kappa = require_kappa(pm_);
  if (!(sm_.max_abs_eigenvalue > 0.0)) {
    throw Error(ErrorKind::DegeneratePreselection, "observable A is zero");
  }
  const double csc2 = 1.0 + (pm_.covariance * pm_.covariance) / (kappa * kappa);
  return std::sqrt(sm_.variance * csc2 + sm_.mean * sm_.mean) / sm_.max_abs_eigenvalue;
}

double SnrModel::ratio_s_fixed_weak_value(Complex a_w) const {
  require_kappa(pm_);
  const double denom = max_snr_std();
  if (!(denom > 0.0)) throw Error(ErrorKind::DegeneratePreselection, "observable A is zero");
  return snr_post(a_w) / denom;
}

double SnrModel::qfi_post_first_order(Complex a_w, double ps) const {
  return 4.0 * ps * std::norm(a_w) * pm_.var_omega;
}

double SnrModel::max_qfi_post() const { return 4.0 * sm_.second * pm_.var_omega; }

double SnrModel::qfi_std() const { return 4.0 * sm_.mean * sm_.mean * pm_.var_omega; }

double snr_post(const SnrConfig& cfg, Complex a_w) { return SnrModel(cfg).snr_post(a_w); }

double snr_post_exact(const SnrConfig& cfg, const SystemState& post) {
  const SnrModel model(cfg);
  const Complex a_w = protocol::weak_value(cfg.pre, post, cfg.a);
  const auto joint = protocol::evolve_joint(cfg.pre, cfg.pointer, cfg.g, cfg.a, cfg.omega);
  const double ps = protocol::postselect(joint, post).prob;
  return model.snr_post(a_w, ps);
}

OptSnrReport max_snr_post(const SnrConfig& cfg) { return SnrModel(cfg).max_snr_post(); }
double max_snr_std(const SnrConfig& cfg) { return SnrModel(cfg).max_snr_std(); }
double ratio_s_optimal(const SnrConfig& cfg) { return SnrModel(cfg).ratio_s_optimal(); }
double ratio_s_fixed_weak_value(const SnrConfig& cfg, Complex a_w) {
  return SnrModel(cfg).ratio_s_fixed_weak_value(a_w);
}

double csc2_phi(const PointerState& pointer, const PointerOperator& omega,
                const PointerOperator& readout) {
  const PointerMoments pm = pointer_moments(pointer, omega, readout);
  const double kappa = require_kappa(pm);
  return 1.0 + (pm.covariance * pm.covariance) / (kappa * kappa);
}

double qfi_post_first_order(const SnrConfig& cfg, Complex a_w, double ps) {
  return SnrModel(cfg).qfi_post_first_order(a_w, ps);
}

double max_qfi_post(const SystemState& pre, const SystemObservable& a,
                    const PointerOperator& omega, const PointerState& pointer) {
  return 4.0 * a.second_moment(pre) * fock::variance(pointer, omega);
}

double qfi_std(const SystemState& pre, const SystemObservable& a, const PointerOperator& omega,
               const PointerState& pointer) {
  const double m = a.mean(pre);
  return 4.0 * m * m * fock::variance(pointer, omega);
}

double default_step(double g0) { return std::max(1e-6, std::abs(g0) / 100.0); }

double qfi_numeric(const StateFamily& family, double g0, std::optional<double> dg) {
  const CVector centre = family(g0).amplitudes();
  return richardson(
      [&](double h) {
        return pure_qfi(family(g0 - h).amplitudes(), centre, family(g0 + h).amplitudes(), h);
      },
      dg.value_or(default_step(g0)), "qfi_numeric");
}

double classical_fisher_p(const DensityFamily& family, const fock::QuadratureGrid& grid, double g0,
                          std::optional<double> dg) {
  const std::vector<double> centre = family(g0);
  if (static_cast<int>(centre.size()) != grid.size()) {
    throw Error(ErrorKind::DimensionMismatch, "classical_fisher_p: density does not match grid");
  }
  return richardson(
      [&](double h) {
        const std::vector<double> lo = family(g0 - h);
        const std::vector<double> hi = family(g0 + h);
        std::vector<double> integrand(centre.size(), 0.0);
        for (std::size_t i = 0; i < centre.size(); ++i) {
          if (centre[i] > 1e-14) {
            const double d = (hi[i] - lo[i]) / (2.0 * h);
            integrand[i] = d * d / centre[i];
          }
        }
        return grid.trapezoid(integrand);
      },
      dg.value_or(default_step(g0)), "classical_fisher_p");
}

double fisher_all_probe(const SnrConfig& cfg, const SystemState& post) {
  validate(cfg);
  const fock::Propagator omega(cfg.omega);
  const auto basis = protocol::completed_basis(post);
  const double g0 = cfg.g;

  // Unnormalized branch vectors <b_j|joint(g)> for every basis element.
  auto branches = [&](double g) {
    const auto joint = protocol::evolve_joint(cfg.pre, cfg.pointer, g, cfg.a, omega);
    std::vector<CVector> out;
    out.reserve(basis.size());
    for (const auto& b : basis) {
      CVector raw = CVector::Zero(joint.pointer_dim());
      for (int s = 0; s < joint.system_dim(); ++s) {
        raw += std::conj(b.amplitudes()[s]) * joint.block(s);
      }
      out.push_back(std::move(raw));
    }
    return out;
  };
  const auto centre = branches(g0);

  return richardson(
      [&](double h) {
        const auto lo = branches(g0 - h);
        const auto hi = branches(g0 + h);
        double total = 0.0;
        for (std::size_t j = 0; j < centre.size(); ++j) {
          const double p0 = centre[j].squaredNorm();
          const double pm = lo[j].squaredNorm();
          const double pp = hi[j].squaredNorm();
          if (std::max({p0, pm, pp}) < 1e-20) continue;
          if (p0 < 1e-300) {
            throw Error(ErrorKind::ZeroProbability,
                        "fisher_all_probe: branch probability vanishes at g0");
          }
          const double dp = (pp - pm) / (2.0 * h);
          total += dp * dp / p0;
          total += p0 * pure_qfi(lo[j] / std::sqrt(pm), centre[j] / std::sqrt(p0),
                                 hi[j] / std::sqrt(pp), h);
        }
        return total;
      },
      default_step(g0), "fisher_all_probe");
}

QfiReport qfi_report(const SnrConfig& cfg, const SystemState& post) {
  const SnrModel model(cfg);
  const Complex a_w = protocol::weak_value(cfg.pre, post, cfg.a);
  const double ps = std::norm(protocol::overlap(post, cfg.pre));
  QfiReport r{};
  r.f_post = model.qfi_post_first_order(a_w, ps);
  r.f_post_max = model.max_qfi_post();
  r.f_std = model.qfi_std();
  if (std::abs(model.system().mean) >= kDegenerateFloor) r.ratio = r.f_post_max / r.f_std;
  r.f_all_probe = fisher_all_probe(cfg, post);
  return r;
}

}  // namespace wvalab::metrology
