#include "wvalab/mc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "wvalab/error.hpp"
#include "wvalab/parallel.hpp"

namespace wvalab::mc {

namespace {

using fock::CVector;

std::vector<double> normalized_density(const fock::MomentumBasis& basis, const CVector& psi) {
  std::vector<double> rho = basis.density(psi);
  const double n2 = psi.squaredNorm();
  for (double& v : rho) v /= n2;
  fock::require_grid_coverage(basis.grid(), rho);
  const double mass = basis.grid().trapezoid(rho);
  for (double& v : rho) v /= mass;
  return rho;
}

std::vector<double> reduced_density(const fock::MomentumBasis& basis,
                                    const protocol::JointState& joint) {
  std::vector<double> rho(basis.grid().size(), 0.0);
  for (int s = 0; s < joint.system_dim(); ++s) {
    const std::vector<double> part = basis.density(joint.block(s));
    for (std::size_t i = 0; i < rho.size(); ++i) rho[i] += part[i];
  }
  fock::require_grid_coverage(basis.grid(), rho);
  const double mass = basis.grid().trapezoid(rho);
  for (double& v : rho) v /= mass;
  return rho;
}

std::int64_t block_count(std::int64_t n) { return (n + kBlockSize - 1) / kBlockSize; }

std::uint64_t repeat_seed(std::uint64_t seed, int repeat) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(repeat), 0x5eedu};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace

std::mt19937_64 block_generator(std::uint64_t seed, std::uint64_t block) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32)};
  return std::mt19937_64(seq);
}

InverseCdfSampler::InverseCdfSampler(const QuadratureGrid& grid, std::span<const double> density)
    : points_(grid.points().begin(), grid.points().end()), cdf_(points_.size(), 0.0) {
  if (density.size() != points_.size()) {
    throw Error(ErrorKind::DimensionMismatch, "sampler: density does not match grid");
  }
  const double h = grid.spacing();
  for (std::size_t i = 1; i < points_.size(); ++i) {
    cdf_[i] = cdf_[i - 1] + 0.5 * h * (std::max(0.0, density[i - 1]) + std::max(0.0, density[i]));
  }
  const double total = cdf_.back();
  if (!(total > 0.0)) throw Error(ErrorKind::ZeroProbability, "sampler: density has no mass");
  for (double& c : cdf_) c /= total;
}

double InverseCdfSampler::operator()(double u) const {
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  std::size_t hi = static_cast<std::size_t>(it - cdf_.begin());
  hi = std::clamp<std::size_t>(hi, 1, cdf_.size() - 1);
  const std::size_t lo = hi - 1;
  const double width = cdf_[hi] - cdf_[lo];
  const double frac = width > 0.0 ? std::clamp((u - cdf_[lo]) / width, 0.0, 1.0) : 0.5;
  return points_[lo] + frac * (points_[hi] - points_[lo]);
}

std::vector<double> sample_outcomes(const fock::PointerState& state, const QuadratureGrid& grid,
                                    std::int64_t n, std::uint64_t seed, int workers) {
  if (n < 0) throw Error(ErrorKind::InvalidArgument, "sample count must be >= 0");
  const std::vector<double> rho = fock::wavefunction_p(state, grid);
  const InverseCdfSampler sampler(grid, rho);
  std::vector<double> out(static_cast<std::size_t>(n));
  parallel_for(block_count(n), workers, [&](std::int64_t b) {
    auto rng = block_generator(seed, static_cast<std::uint64_t>(b));
    const std::int64_t end = std::min(n, (b + 1) * kBlockSize);
    for (std::int64_t i = b * kBlockSize; i < end; ++i) out[i] = sampler(uniform01(rng));
  });
  return out;
}

RunSimulator::RunSimulator(const RunConfig& rc)
    : trials_(rc.trials), g_(rc.cfg.g), postselected_(rc.post.has_value()) {
  if (rc.trials < 1) throw Error(ErrorKind::InvalidArgument, "trials must be >= 1");
  if (!(rc.cfg.g >= 0.0)) throw Error(ErrorKind::InvalidArgument, "g must be >= 0");
  const fock::MomentumBasis basis(rc.cfg.pointer.dim(), rc.grid);
  const auto joint = protocol::evolve_joint(rc.cfg.pre, rc.cfg.pointer, rc.cfg.g, rc.cfg.a,
                                            rc.cfg.omega);
  if (postselected_) {
    const auto outcome = protocol::postselect(joint, *rc.post);
    prob_ = outcome.prob;
    density_ = normalized_density(basis, outcome.pointer.amplitudes());
  } else {
    prob_ = 1.0;
    density_ = reduced_density(basis, joint);
  }
  sampler_ = std::make_shared<const InverseCdfSampler>(rc.grid, density_);
}

RunRecord RunSimulator::run(std::uint64_t seed, int workers) const {
  const std::int64_t blocks = block_count(trials_);
  std::vector<std::vector<double>> parts(static_cast<std::size_t>(blocks));
  parallel_for(blocks, workers, [&](std::int64_t b) {
    auto rng = block_generator(seed, static_cast<std::uint64_t>(b));
    const std::int64_t count = std::min(trials_, (b + 1) * kBlockSize) - b * kBlockSize;
    auto& part = parts[static_cast<std::size_t>(b)];
    for (std::int64_t i = 0; i < count; ++i) {
      if (postselected_ && !(uniform01(rng) < prob_)) continue;
      part.push_back((*sampler_)(uniform01(rng)));
    }
  });
  RunRecord rec{trials_, 0, {}, g_, prob_};
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  rec.outcomes.reserve(total);
  for (const auto& p : parts) rec.outcomes.insert(rec.outcomes.end(), p.begin(), p.end());
  rec.accepted = static_cast<std::int64_t>(total);
  return rec;
}

RunRecord simulate_run(const RunConfig& rc, int workers) {
  return RunSimulator(rc).run(rc.seed, workers);
}

DensityFamily outcome_density_family(const SnrConfig& cfg, const std::optional<SystemState>& post,
                                     const QuadratureGrid& grid) {
  auto basis = std::make_shared<const fock::MomentumBasis>(cfg.pointer.dim(), grid);
  auto omega = std::make_shared<const fock::Propagator>(cfg.omega);
  return [cfg, post, basis, omega](double g) {
    const auto joint = protocol::evolve_joint(cfg.pre, cfg.pointer, g, cfg.a, *omega);
    if (post) {
      return normalized_density(*basis, protocol::postselect(joint, *post).pointer.amplitudes());
    }
    return reduced_density(*basis, joint);
  };
}

double amr_slope(const SnrConfig& cfg, const std::optional<SystemState>& post) {
  const auto pm = metrology::pointer_moments(cfg.pointer, cfg.omega, cfg.readout);
  if (post) {
    const auto a_w = protocol::weak_value(cfg.pre, *post, cfg.a);
    return a_w.imag() * pm.covariance + a_w.real() * pm.kappa;
  }
  return cfg.a.mean(cfg.pre) * pm.kappa;
}

EstimatorReport amr_estimate(const RunRecord& record, double slope, double baseline) {
  if (!(std::abs(slope) >= 1e-14)) {
    throw Error(ErrorKind::ZeroSlope, "AMR calibration slope vanishes");
  }
  const auto& x = record.outcomes;
  const std::int64_t n = static_cast<std::int64_t>(x.size());
  EstimatorReport r{};
  r.n_effective = n;
  if (n == 0) {
    r.g_hat = r.std_err = r.empirical_snr = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  double mean = 0.0;
  for (double v : x) mean += v - baseline;
  mean /= static_cast<double>(n);
  r.g_hat = mean / slope;
  if (n < 2) {
    r.std_err = r.empirical_snr = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  double ss = 0.0;
  for (double v : x) {
    const double d = v - baseline - mean;
    ss += d * d;
  }
  const double stdev = std::sqrt(ss / static_cast<double>(n - 1));
  r.std_err = stdev / (std::abs(slope) * std::sqrt(static_cast<double>(n)));
  r.empirical_snr = record.g_true / r.std_err;
  return r;
}

Window mle_window(const EstimatorReport& amr) {
  if (!std::isfinite(amr.g_hat) || !(amr.std_err > 0.0) || !std::isfinite(amr.std_err)) {
    throw Error(ErrorKind::InvalidArgument, "MLE window needs a finite AMR estimate");
  }
  return {amr.g_hat - 8.0 * amr.std_err, amr.g_hat + 8.0 * amr.std_err};
}

EstimatorReport mle_estimate(const RunRecord& record, const DensityFamily& family,
                             const QuadratureGrid& grid, Window window) {
  if (!(window.hi > window.lo)) throw Error(ErrorKind::InvalidArgument, "empty MLE window");
  if (record.outcomes.empty()) throw Error(ErrorKind::InvalidArgument, "MLE needs outcomes");
  const int cells = grid.size() - 1;
  std::vector<std::int64_t> counts(static_cast<std::size_t>(cells), 0);
  for (double x : record.outcomes) {
    const int c = std::clamp(static_cast<int>(std::floor((x - grid.lo()) / grid.spacing())), 0,
                             cells - 1);
    ++counts[static_cast<std::size_t>(c)];
  }
  std::vector<int> occupied;
  for (int c = 0; c < cells; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) occupied.push_back(c);
  }

  auto loglik = [&](double g) {
    const std::vector<double> rho = family(g);
    double total = 0.0;
    for (int c = 0; c < cells; ++c) total += rho[c] + rho[c + 1];
    double ll = 0.0;
    for (int c : occupied) {
      const double m = (rho[c] + rho[c + 1]) / total;
      if (!(m > 0.0)) return -std::numeric_limits<double>::infinity();
      ll += static_cast<double>(counts[static_cast<std::size_t>(c)]) * std::log(m);
    }
    return ll;
  };

  constexpr int kScan = 64;
  const double spacing = (window.hi - window.lo) / (kScan - 1);
  int best = 0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < kScan; ++k) {
    const double ll = loglik(window.lo + spacing * k);
    if (ll > best_ll) {
      best_ll = ll;
      best = k;
    }
  }
  if (best == 0 || best == kScan - 1) {
    std::ostringstream os;
    os << "likelihood peaks at the edge of the window [" << window.lo << ", " << window.hi << "]";
    throw Error(ErrorKind::MaximumOnBoundary, os.str());
  }

  // Golden-section refinement on the bracketing scan cells.
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = window.lo + spacing * (best - 1);
  double b = window.lo + spacing * (best + 1);
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = loglik(c);
  double fd = loglik(d);
  while (b - a > 1e-3 * spacing) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = loglik(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = loglik(d);
    }
  }
  const double g_hat = 0.5 * (a + b);

  // Observed information.
  const double step = spacing;
  const double l0 = loglik(g_hat);
  const double curvature = (loglik(g_hat + step) - 2.0 * l0 + loglik(g_hat - step)) / (step * step);

  EstimatorReport r{};
  r.g_hat = g_hat;
  r.n_effective = static_cast<std::int64_t>(record.outcomes.size());
  r.std_err = curvature < 0.0 ? 1.0 / std::sqrt(-curvature)
                              : std::numeric_limits<double>::infinity();
  r.empirical_snr = record.g_true / r.std_err;
  return r;
}

EfficiencyReport mle_efficiency(const RunConfig& rc, int repeats, int workers) {
  if (repeats < 2) throw Error(ErrorKind::InvalidArgument, "need at least two repeats");
  const RunSimulator sim(rc);
  const DensityFamily family = outcome_density_family(rc.cfg, rc.post, rc.grid);
  const double slope = amr_slope(rc.cfg, rc.post);
  const double baseline = fock::expectation(rc.cfg.pointer, rc.cfg.readout).real();

  std::vector<double> scaled(static_cast<std::size_t>(repeats));
  std::vector<double> accepted(static_cast<std::size_t>(repeats));
  parallel_for(repeats, workers, [&](std::int64_t r) {
    const RunRecord rec = sim.run(repeat_seed(rc.seed, static_cast<int>(r)));
    const EstimatorReport amr = amr_estimate(rec, slope, baseline);
    const EstimatorReport mle = mle_estimate(rec, family, rc.grid, mle_window(amr));
    const double err = mle.g_hat - rc.cfg.g;
    scaled[static_cast<std::size_t>(r)] = static_cast<double>(rec.accepted) * err * err;
    accepted[static_cast<std::size_t>(r)] = static_cast<double>(rec.accepted);
  });

  EfficiencyReport out{};
  out.repeats = repeats;
  out.mean_accepted = std::accumulate(accepted.begin(), accepted.end(), 0.0) / repeats;
  out.n_mse = std::accumulate(scaled.begin(), scaled.end(), 0.0) / repeats;
  out.cfi = metrology::classical_fisher_p(family, rc.grid, rc.cfg.g);
  out.inverse_cfi = 1.0 / out.cfi;
  out.ratio = out.n_mse * out.cfi;
  return out;
}

}  // namespace wvalab::mc
