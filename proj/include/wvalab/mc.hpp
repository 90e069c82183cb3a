#pragma once

// Monte Carlo realization of postselected and standard weak measurements with
// averaging (AMR) and maximum-likelihood (MLE) estimators of g.

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "wvalab/fock.hpp"
#include "wvalab/metrology.hpp"
#include "wvalab/protocol.hpp"

namespace wvalab::mc {

using fock::QuadratureGrid;
using metrology::DensityFamily;
using metrology::SnrConfig;
using protocol::SystemState;

// Trials are drawn in fixed-size blocks; block b owns its own generator
// seeded from (seed, b), so results do not depend on the worker count.
inline constexpr std::int64_t kBlockSize = 65536;

std::mt19937_64 block_generator(std::uint64_t seed, std::uint64_t block);
// 53-bit uniform in [0, 1).
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct RunConfig {
  SnrConfig cfg;
  std::optional<SystemState> post;  // empty: standard weak measurement
  std::int64_t trials;
  std::uint64_t seed;
  QuadratureGrid grid;
};

struct RunRecord {
  std::int64_t trials;
  std::int64_t accepted;
  std::vector<double> outcomes;
  double g_true;
  double acceptance_prob;  // exact, from the evolved joint state
};

struct EstimatorReport {
  double g_hat;
  double std_err;
  double empirical_snr;
  std::int64_t n_effective;
};

// Inverse transform on the trapezoid CDF of a gridded density, linear within
// each cell.
class InverseCdfSampler {
 public:
  InverseCdfSampler(const QuadratureGrid& grid, std::span<const double> density);
  double operator()(double u) const;

 private:
  std::vector<double> points_;
  std::vector<double> cdf_;
};

std::vector<double> sample_outcomes(const fock::PointerState& state, const QuadratureGrid& grid,
                                    std::int64_t n, std::uint64_t seed, int workers = 1);

// Exact evolved state, acceptance probability and outcome density for one
// RunConfig, reusable across seeds.
class RunSimulator {
 public:
  explicit RunSimulator(const RunConfig& rc);

  double acceptance_prob() const { return prob_; }
  const std::vector<double>& density() const { return density_; }
  RunRecord run(std::uint64_t seed, int workers = 1) const;

 private:
  std::int64_t trials_;
  double g_;
  bool postselected_;
  double prob_;
  std::vector<double> density_;
  std::shared_ptr<const InverseCdfSampler> sampler_;
};

RunRecord simulate_run(const RunConfig& rc, int workers = 1);

// g -> outcome density on `grid`: normalized postselected pointer when `post`
// is set, otherwise the reduced pointer of the standard measurement.
DensityFamily outcome_density_family(const SnrConfig& cfg, const std::optional<SystemState>& post,
                                     const QuadratureGrid& grid);

// d<Delta M>/dg to first order: Im A_w C + Re A_w kappa, or <A> kappa.
double amr_slope(const SnrConfig& cfg, const std::optional<SystemState>& post);

// Throws ZeroSlope for |slope| < 1e-14.
EstimatorReport amr_estimate(const RunRecord& record, double slope, double baseline);

struct Window {
  double lo;
  double hi;
};
// AMR estimate +- 8 standard errors.
Window mle_window(const EstimatorReport& amr);

// Outcomes are binned into grid cells; the cell masses of family(g) give the
// likelihood. A 64-point scan over the window is refined by golden section
// to 1e-3 of the scan spacing. Throws MaximumOnBoundary when the scan peaks
// at either end.
EstimatorReport mle_estimate(const RunRecord& record, const DensityFamily& family,
                             const QuadratureGrid& grid, Window window);

struct EfficiencyReport {
  int repeats;
  double mean_accepted;
  double n_mse;        // mean of n (g_hat - g)^2
  double cfi;          // per-sample classical Fisher information
  double inverse_cfi;  // 1 / cfi
  double ratio;        // n_mse * cfi
};

// Repeats full runs with seeds derived from rc.seed and compares the MLE's
// scaled mean squared error with the Cramer-Rao value.
EfficiencyReport mle_efficiency(const RunConfig& rc, int repeats, int workers = 1);

}  // namespace wvalab::mc
