#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "wvalab/error.hpp"

using namespace testsupport;
using doctest::Approx;
using wvalab::Error;
using wvalab::ErrorKind;

namespace {

constexpr double kPi = std::numbers::pi;

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::InvalidArgument;
}

struct GridMax {
  double snr = 0.0;
  double qfi = 0.0;
};

// Polar grid over weak values with first-order optimal success probability.
GridMax brute_force(const metrology::SnrConfig& cfg, int radii, int angles) {
  const metrology::SnrModel model(cfg);
  const auto& sm = model.system();
  GridMax best;
  for (int i = 0; i < radii; ++i) {
    const double rad = 0.1 * std::pow(500.0, static_cast<double>(i) / (radii - 1));
    for (int k = 0; k < angles; ++k) {
      const Complex aw = std::polar(rad, -kPi + 2.0 * kPi * k / angles);
      const double ps = sm.variance / (sm.second - 2.0 * sm.mean * aw.real() + std::norm(aw));
      best.snr = std::max(best.snr, std::abs(model.snr_post(aw, ps)));
      best.qfi = std::max(best.qfi, model.qfi_post_first_order(aw, ps));
    }
  }
  return best;
}

}  // namespace

TEST_CASE("config validation") {
  const auto s = qubit_setup(protocol::SystemState::plus(), fock::vacuum(64));
  CHECK_NOTHROW(metrology::validate(s.snr(1e-5, 1)));
  CHECK(kind_of([&] { metrology::validate(s.snr(0.0, 1)); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { metrology::validate(s.snr(1e-5, 0)); }) == ErrorKind::InvalidArgument);
  auto bad = s.snr(1e-5, 1);
  bad.omega = fock::quadrature_ops(32).q;
  CHECK(kind_of([&] { metrology::validate(bad); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("postselected snr") {
  const auto plus = protocol::SystemState::plus();
  const auto coh = qubit_setup(plus, fock::coherent_state(Complex{0.9, -0.4}, 64));
  const double ps = 0.3;
  const double var_p = fock::variance(coh.pointer, coh.p);
  CHECK(metrology::SnrModel(coh.snr(1e-3, 100)).snr_post(2.5, ps) ==
        Approx(-1e-3 * std::sqrt(100 * ps) * 2.5 / std::sqrt(var_p)).epsilon(1e-10));

  const auto vac = qubit_setup(plus, fock::vacuum(64));
  CHECK(std::abs(metrology::snr_post(vac.snr(1e-5, 1), 20.0 * I)) < 1e-18);

  const auto sq = qubit_setup(plus, fock::squeezed_coherent_state(I, 0.0, 256));
  const double vp = fock::variance(sq.pointer, sq.p);
  CHECK(metrology::snr_post(sq.snr(1e-5, 1), 20.0 * I) ==
        Approx(1e-5 * 20.0 * -std::sinh(2.0) / std::sqrt(401.0 * vp)).epsilon(1e-9));

  const auto post = protocol::optimal_postselection(plus, sq.a, 20.0 * I);
  CHECK(metrology::snr_post_exact(sq.snr(1e-5, 1), post) ==
        Approx(metrology::snr_post(sq.snr(1e-5, 1), 20.0 * I)).epsilon(1e-3));

  const auto eig = qubit_setup(protocol::SystemState::basis(0, 2), fock::vacuum(64));
  CHECK(kind_of([&] { metrology::snr_post(eig.snr(1e-5, 1), 2.0); }) ==
        ErrorKind::UnachievableWeakValue);
}

TEST_CASE("standard snr") {
  const auto vac = qubit_setup(qubit(0.3, 0.0), fock::vacuum(64));
  const double g = 1e-4;
  CHECK(metrology::max_snr_std(vac.snr(g, 1)) == Approx(g * std::sqrt(2.0)).epsilon(1e-12));
  auto half = vac.snr(g, 1);
  half.a = protocol::SystemObservable(0.5 * vac.a.matrix());
  CHECK(metrology::max_snr_std(half) == Approx(g * std::sqrt(2.0) / 2).epsilon(1e-12));
  auto same = vac.snr(g, 1);
  same.readout = same.omega;
  CHECK(metrology::max_snr_std(same) == Approx(0.0));
}

TEST_CASE("maximal postselected snr") {
  std::mt19937_64 rng(12);
  for (int k = 0; k < 5; ++k) {
    const auto pre = qubit(uniform(rng, 0.1, 0.7), uniform(rng, -3, 3));
    const auto s = qubit_setup(pre, fock::vacuum(64));
    const auto r = metrology::max_snr_post(s.snr(1e-4, 7));
    // i<[q,p]> = -1, so the angle sits at -pi/2.
    CHECK(r.phi == Approx(-kPi / 2).epsilon(1e-12));
    CHECK(r.eta == Approx(1.0).epsilon(1e-12));
    CHECK(r.max_snr == Approx(1e-4 * std::sqrt(2.0 * 7)).epsilon(1e-10));
    CHECK(r.max_snr <= r.upper_bound + 1e-9);
  }

  const auto sq = qubit_setup(qubit(0.5, 0.4), fock::squeezed_coherent_state(Complex{0.6, 0.8}, 0.3, 128));
  const auto cfg = sq.snr(1e-5, 1000);
  const auto r = metrology::max_snr_post(cfg);
  const metrology::SnrModel model(cfg);
  const auto& sm = model.system();
  CHECK(r.eta * r.eta ==
        Approx(sm.variance + sm.mean * sm.mean * std::pow(std::sin(r.phi), 2)).epsilon(1e-10));
  CHECK(std::abs(metrology::snr_post(cfg, r.optimal_Aw)) == Approx(r.max_snr).epsilon(1e-10));
  CHECK(r.max_snr <= r.upper_bound + 1e-9);

  const auto zero_mean = qubit_setup(protocol::SystemState::plus(), fock::vacuum(64));
  CHECK(kind_of([&] { metrology::max_snr_post(zero_mean.snr(1e-5, 1)); }) ==
        ErrorKind::DegeneratePreselection);
  const auto eig = qubit_setup(protocol::SystemState::basis(1, 2), fock::vacuum(64));
  CHECK(kind_of([&] { metrology::max_snr_post(eig.snr(1e-5, 1)); }) ==
        ErrorKind::DegeneratePreselection);
}

TEST_CASE("optimizers dominate a weak-value grid") {
  std::mt19937_64 rng(77);
  for (int k = 0; k < 3; ++k) {
    const auto pre = qubit(uniform(rng, 0.2, 0.6), uniform(rng, -3, 3));
    const auto s = qubit_setup(pre, fock::squeezed_coherent_state(random_disc(rng, 1.0), random_disc(rng, 1.0), 128));
    const auto cfg = s.snr(1.0, 1);
    const auto best = brute_force(cfg, 200, 200);
    const double smax = metrology::max_snr_post(cfg).max_snr;
    const double qmax = metrology::max_qfi_post(s.pre, s.a, s.q, s.pointer);
    CHECK(best.snr <= smax + 1e-9);
    CHECK(best.qfi <= qmax + 1e-9);
    CHECK(best.snr >= 0.999 * smax);
    CHECK(best.qfi >= 0.999 * qmax);
  }
}

TEST_CASE("ratio s") {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 20; ++k) {
    const auto pre = qubit(uniform(rng, 0.05, 1.5), uniform(rng, -3, 3));
    const auto s = qubit_setup(pre, fock::coherent_state(random_disc(rng, 2.0), 64));
    CHECK(metrology::ratio_s_optimal(s.snr(1e-5, 1)) == Approx(1.0).epsilon(1e-8));
    CHECK(metrology::csc2_phi(s.pointer, s.q, s.p) == Approx(1.0).epsilon(1e-8));
  }

  const auto plus_sq = qubit_setup(protocol::SystemState::plus(), fock::squeezed_coherent_state(I, 0.0, 768));
  const auto cfg = plus_sq.snr(1e-5, 1);
  const double sh = std::sinh(2.0);
  CHECK(metrology::ratio_s_optimal(cfg) == Approx(std::sqrt(1 + sh * sh)).epsilon(1e-8));
  CHECK(metrology::ratio_s_fixed_weak_value(cfg, 20.0 * I) ==
        Approx(20.0 / std::sqrt(401.0) * -sh).epsilon(1e-8));
  CHECK(metrology::ratio_s_fixed_weak_value(qubit_setup(protocol::SystemState::plus(), fock::vacuum(64)).snr(1e-5, 1), 20.0 * I) ==
        Approx(0.0));
  const auto conj = qubit_setup(protocol::SystemState::plus(), fock::squeezed_coherent_state(-I, 0.0, 768));
  CHECK(metrology::ratio_s_fixed_weak_value(conj.snr(1e-5, 1), 20.0 * I) ==
        Approx(-metrology::ratio_s_fixed_weak_value(cfg, 20.0 * I)).epsilon(1e-12));

  // Near-eigenstate limit.
  const auto near = qubit_setup(qubit(1e-5, 0.0), fock::squeezed_coherent_state(I, 0.0, 768));
  CHECK(metrology::ratio_s_optimal(near.snr(1e-5, 1)) == Approx(1.0).epsilon(1e-6));

  for (int k = 0; k < 100; ++k) {
    const int d = 2 + k % 2;
    CMatrix m = CMatrix::Zero(d, d);
    for (int i = 0; i < d; ++i) m(i, i) = uniform(rng, -2, 2);
    m(0, d - 1) = Complex{uniform(rng, -1, 1), uniform(rng, -1, 1)};
    m(d - 1, 0) = std::conj(m(0, d - 1));
    const protocol::SystemObservable a(m);
    const auto pre = random_state(rng, d);
    const auto ptr = fock::squeezed_coherent_state(random_disc(rng, 1.0), random_disc(rng, 1.0), 128);
    const auto quads = fock::quadrature_ops(128);
    const metrology::SnrConfig c{uniform(rng, 1e-6, 1e-3), 1 + k, pre, a, ptr, quads.q, quads.p};
    const double ratio = metrology::max_snr_post(c).max_snr / metrology::max_snr_std(c);
    CHECK(metrology::ratio_s_optimal(c) == Approx(ratio).epsilon(1e-10));
  }
}

TEST_CASE("squeezed advantage for sigma_z") {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 20; ++k) {
    const auto s = qubit_setup(qubit(uniform(rng, 0.05, 1.5), uniform(rng, -3, 3)),
                               fock::squeezed_coherent_state(random_disc(rng, 1.2), random_disc(rng, 1.0), 256));
    const double ratio = metrology::ratio_s_optimal(s.snr(1e-5, 1));
    CHECK(ratio >= 1.0 - 1e-12);
    if (metrology::csc2_phi(s.pointer, s.q, s.p) > 1.0 + 1e-6) CHECK(ratio > 1.0);
  }
}

TEST_CASE("csc2 phi") {
  CHECK(metrology::csc2_phi(fock::squeezed_coherent_state(I, 0.0, 256), fock::quadrature_ops(256).q,
                            fock::quadrature_ops(256).p) ==
        Approx(1 + std::pow(std::sinh(2.0), 2)).epsilon(1e-8));
  std::mt19937_64 rng(4);
  const auto quads = fock::quadrature_ops(256);
  for (int k = 0; k < 10; ++k) {
    const double r = uniform(rng, 0.0, 1.4);
    const double th = uniform(rng, -kPi, kPi);
    const auto st = fock::squeezed_coherent_state(std::polar(r, th), random_disc(rng, 1.0), 256);
    CHECK(metrology::csc2_phi(st, quads.q, quads.p) == Approx(squeezed_csc2(r, th)).epsilon(1e-8));
  }
  CHECK(kind_of([&] { metrology::csc2_phi(fock::vacuum(256), quads.q, quads.q); }) ==
        ErrorKind::CommutatorVanishes);
}

TEST_CASE("closed-form qfi") {
  const auto plus = qubit_setup(protocol::SystemState::plus(), fock::vacuum(64));
  const auto cfg = plus.snr(1e-5, 1);
  CHECK(metrology::qfi_post_first_order(cfg, 0.0, 0.5) == 0.0);
  CHECK(metrology::qfi_post_first_order(cfg, 20.0 * I, 1.0 / 401) ==
        Approx(4.0 * 400.0 / 401.0 * 0.5).epsilon(1e-12));
  const auto wide = qubit_setup(protocol::SystemState::plus(), fock::squeezed_coherent_state(-std::log(2.0) / 2, 0.0, 64));
  CHECK(fock::variance(wide.pointer, wide.q) == Approx(1.0).epsilon(1e-10));
  CHECK(metrology::qfi_post_first_order(wide.snr(1e-5, 1), 20.0 * I, 1.0 / 401) ==
        Approx(2 * metrology::qfi_post_first_order(cfg, 20.0 * I, 1.0 / 401)).epsilon(1e-9));

  CHECK(metrology::max_qfi_post(plus.pre, plus.a, plus.q, plus.pointer) == Approx(2.0));
  const auto sq0 = fock::squeezed_coherent_state(1.0, 0.0, 128);
  const auto q128 = fock::quadrature_ops(128).q;
  const double vq = fock::variance(sq0, q128);
  CHECK(vq == Approx(std::exp(-2.0) / 2).epsilon(1e-10));
  CHECK(metrology::max_qfi_post(plus.pre, plus.a, q128, sq0) ==
        Approx(4 * vq).epsilon(1e-12));

  CHECK(metrology::qfi_std(plus.pre, plus.a, plus.q, plus.pointer) == Approx(0.0));
  const auto zero = protocol::SystemState::basis(0, 2);
  CHECK(metrology::qfi_std(zero, plus.a, plus.q, plus.pointer) == Approx(2.0));
  const auto tilt = qubit(kPi / 8, 0.0);
  CHECK(metrology::max_qfi_post(tilt, plus.a, plus.q, plus.pointer) /
            metrology::qfi_std(tilt, plus.a, plus.q, plus.pointer) ==
        Approx(2.0).epsilon(1e-12));
}

TEST_CASE("numerical qfi") {
  const auto quads = fock::quadrature_ops(64);
  const fock::Propagator prop(quads.q);
  const auto vac = fock::vacuum(64);
  CHECK(metrology::qfi_numeric([&](double g) { return prop.apply(vac, g); }, 0.0) ==
        Approx(2.0).epsilon(1e-6));

  const auto sz = protocol::SystemObservable::sigma_z();
  const auto plus = protocol::SystemState::plus();
  const auto post = protocol::optimal_postselection(plus, sz, 20.0 * I);
  const auto fam = [&](double g) {
    return protocol::postselect(protocol::evolve_joint(plus, vac, g, sz, prop), post).pointer;
  };
  const double g0 = 1e-6;
  const double ps = protocol::postselect(protocol::evolve_joint(plus, vac, g0, sz, prop), post).prob;
  CHECK(ps * metrology::qfi_numeric(fam, g0) ==
        Approx(4.0 * ps * 400.0 * 0.5).epsilon(0.01));

  const auto pre = qubit(0.4, 0.0);
  const double m = sz.mean(pre);
  CHECK(metrology::qfi_numeric([&](double g) { return prop.apply(vac, g * m); }, g0) ==
        Approx(metrology::qfi_std(pre, sz, quads.q, vac)).epsilon(1e-6));
}

TEST_CASE("classical fisher information") {
  const auto quads = fock::quadrature_ops(64);
  const auto grid = fock::QuadratureGrid::for_dim(64);
  const fock::Propagator prop(quads.q);
  const auto vac = fock::vacuum(64);
  const metrology::DensityFamily shifted = [&](double g) {
    return fock::wavefunction_p(prop.apply(vac, g), grid);
  };
  const double cfi = metrology::classical_fisher_p(shifted, grid, 0.0);
  CHECK(cfi == Approx(2.0).epsilon(1e-6));
  CHECK(cfi <= metrology::qfi_numeric([&](double g) { return prop.apply(vac, g); }, 0.0) + 1e-6);

  const metrology::DensityFamily flat = [&](double) { return fock::wavefunction_p(vac, grid); };
  CHECK(metrology::classical_fisher_p(flat, grid, 0.3) == Approx(0.0));

  // Squeezing along q makes the p readout blind to part of the signal.
  const auto st = fock::squeezed_coherent_state(Complex{0.3, 0.4}, 0.5, 64);
  const metrology::DensityFamily fam = [&](double g) {
    return fock::wavefunction_p(prop.apply(st, g), grid);
  };
  CHECK(metrology::classical_fisher_p(fam, grid, 0.0) <=
        metrology::qfi_numeric([&](double g) { return prop.apply(st, g); }, 0.0) + 1e-6);
}

TEST_CASE("fisher information hierarchy") {
  std::mt19937_64 rng(19);
  for (int k = 0; k < 4; ++k) {
    const auto pre = qubit(uniform(rng, 0.2, 0.6), uniform(rng, -3, 3));
    const auto s = qubit_setup(pre, fock::squeezed_coherent_state(random_disc(rng, 0.8), random_disc(rng, 1.0), 128));
    const auto cfg = s.snr(1e-5, 1);
    const auto& sm = metrology::SnrModel(cfg).system();
    const auto post = protocol::optimal_postselection(pre, s.a, sm.second / sm.mean);
    const auto rep = metrology::qfi_report(cfg, post);
    CHECK(rep.f_all_probe >= 0.95 * rep.f_post_max);
    CHECK(rep.f_post_max >= rep.f_std * (1 - 1e-9));
    CHECK(rep.f_post >= 0.0);
    REQUIRE(rep.ratio.has_value());
    CHECK(*rep.ratio == Approx(sm.second / (sm.mean * sm.mean)).epsilon(1e-10));
  }

  // Eigenstate: the split carries nothing.
  const auto eig = qubit_setup(protocol::SystemState::basis(0, 2), fock::vacuum(64));
  const auto rep = metrology::qfi_report(eig.snr(1e-5, 1), eig.pre);
  CHECK(rep.f_all_probe == Approx(rep.f_std).epsilon(1e-4));
  CHECK(rep.f_std == Approx(2.0));

  const auto zm = qubit_setup(protocol::SystemState::plus(), fock::vacuum(64));
  const auto post = protocol::optimal_postselection(zm.pre, zm.a, 20.0 * I);
  const auto zrep = metrology::qfi_report(zm.snr(1e-5, 1), post);
  CHECK_FALSE(zrep.ratio.has_value());
  CHECK(zrep.f_all_probe >= zrep.f_post * 0.95);
}
