#pragma once

// Shared fixtures and hand-derived reference formulas for the unit and
// acceptance suites.

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "wvalab/fock.hpp"
#include "wvalab/metrology.hpp"
#include "wvalab/protocol.hpp"

namespace testsupport {

using wvalab::fock::CMatrix;
using wvalab::fock::Complex;
using wvalab::fock::CVector;
namespace fock = wvalab::fock;
namespace protocol = wvalab::protocol;
namespace metrology = wvalab::metrology;

inline constexpr Complex I{0.0, 1.0};

inline protocol::SystemState state2(Complex c0, Complex c1) {
  CVector v(2);
  v << c0, c1;
  return protocol::SystemState::normalized(v);
}

inline protocol::SystemState random_state(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> n(0.0, 1.0);
  CVector v(d);
  for (int i = 0; i < d; ++i) v[i] = Complex{n(rng), n(rng)};
  return protocol::SystemState::normalized(v);
}

// Qubit preselection cos(t)|0> + e^{i f} sin(t)|1>, so <sigma_z> = cos 2t.
inline protocol::SystemState qubit(double t, double f) {
  return state2(std::cos(t), std::polar(std::sin(t), f));
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Complex random_disc(std::mt19937_64& rng, double radius) {
  const double r = radius * std::sqrt(uniform(rng, 0.0, 1.0));
  return std::polar(r, uniform(rng, -std::numbers::pi, std::numbers::pi));
}

// Moments of S(xi)|alpha> from S^dag a S = a cosh r - a^dag e^{i theta} sinh r.
struct SqueezedMoments {
  Complex a;
  Complex a2;
  double n;
};

inline SqueezedMoments squeezed_moments(Complex xi, Complex alpha) {
  const double r = std::abs(xi);
  const Complex e = r > 0 ? xi / r : Complex{1.0, 0.0};
  const double c = std::cosh(r);
  const double s = std::sinh(r);
  const double n0 = std::norm(alpha);
  SqueezedMoments m;
  m.a = alpha * c - std::conj(alpha) * e * s;
  m.a2 = alpha * alpha * c * c - c * s * e * (2.0 * n0 + 1.0) +
         e * e * s * s * std::conj(alpha) * std::conj(alpha);
  m.n = c * c * n0 - c * s * 2.0 * (e * std::conj(alpha) * std::conj(alpha)).real() +
        s * s * (n0 + 1.0);
  return m;
}

// 1 + 4 (sin theta sinh r cosh r)^2
inline double squeezed_csc2(double r, double theta) {
  const double x = std::sin(theta) * std::sinh(r) * std::cosh(r);
  return 1.0 + 4.0 * x * x;
}

struct QubitSetup {
  protocol::SystemState pre;
  protocol::SystemObservable a;
  fock::PointerState pointer;
  fock::PointerOperator q;
  fock::PointerOperator p;

  metrology::SnrConfig snr(double g, std::int64_t n) const { return {g, n, pre, a, pointer, q, p}; }
};

inline QubitSetup qubit_setup(const protocol::SystemState& pre, const fock::PointerState& pointer) {
  const auto quads = fock::quadrature_ops(pointer.dim());
  return {pre, protocol::SystemObservable::sigma_z(), pointer, quads.q, quads.p};
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("wvalab_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace testsupport
