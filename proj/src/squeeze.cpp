#include <cmath>
#include <map>
#include <mutex>

#include <Eigen/Eigenvalues>

#include "wvalab/error.hpp"
#include "wvalab/fock.hpp"

namespace wvalab::fock {

// For xi = r e^{i theta}:
//   1/2 (xi^* a^2 - xi a^dag^2) = U (r K) U^dag,  U = diag(e^{i theta n/2}),
//   K = 1/2 (a^2 - a^dag^2)  (real antisymmetric).
// In a parity sector (n = 2k + parity) K is tridiagonal with superdiagonal
// b_k = sqrt((n+1)(n+2))/2, and with D = diag(i^k) one has D^dag K D = i T
// where T is real symmetric tridiagonal with off-diagonal b_k. Hence
//   exp(r K) = D W exp(i r Lambda) W^T D^dag,   T = W Lambda W^T.
Squeezer::Squeezer(int dim) : dim_(dim) {
  if (dim < 2) throw Error(ErrorKind::InvalidDimension, "squeezer needs dim >= 2");
  for (int parity = 0; parity < 2; ++parity) {
    const int m = (dim - parity + 1) / 2;
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd sub(std::max(m - 1, 0));
    for (int k = 0; k + 1 < m; ++k) {
      const double n = 2.0 * k + parity;
      sub[k] = 0.5 * std::sqrt((n + 1.0) * (n + 2.0));
    }
    Sector& s = sectors_[parity];
    if (m == 1) {
      s.eigenvalues = Eigen::VectorXd::Zero(1);
      s.eigenvectors = Eigen::MatrixXd::Identity(1, 1);
      continue;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    s.eigenvalues = solver.eigenvalues();
    s.eigenvectors = solver.eigenvectors();
  }
}

CVector Squeezer::apply(Complex xi, const CVector& amplitudes) const {
  if (amplitudes.size() != dim_) {
    throw Error(ErrorKind::DimensionMismatch, "squeezer dimension mismatch");
  }
  const double r = std::abs(xi);
  const double theta = std::arg(xi);
  static const Complex kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};

  CVector out(dim_);
  for (int parity = 0; parity < 2; ++parity) {
    const Sector& s = sectors_[parity];
    const Eigen::Index m = s.eigenvalues.size();
    // y = D^dag U^dag x restricted to the sector
    Eigen::VectorXd y_re(m);
    Eigen::VectorXd y_im(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const int n = static_cast<int>(2 * k + parity);
      const Complex u = std::polar(1.0, -0.5 * theta * n) * std::conj(kIPow[k & 3]);
      const Complex v = u * amplitudes[n];
      y_re[k] = v.real();
      y_im[k] = v.imag();
    }
    const Eigen::VectorXd z_re = s.eigenvectors.transpose() * y_re;
    const Eigen::VectorXd z_im = s.eigenvectors.transpose() * y_im;
    Eigen::VectorXd w_re(m);
    Eigen::VectorXd w_im(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const Complex z = Complex{z_re[k], z_im[k]} * std::polar(1.0, r * s.eigenvalues[k]);
      w_re[k] = z.real();
      w_im[k] = z.imag();
    }
    const Eigen::VectorXd x_re = s.eigenvectors * w_re;
    const Eigen::VectorXd x_im = s.eigenvectors * w_im;
    for (Eigen::Index k = 0; k < m; ++k) {
      const int n = static_cast<int>(2 * k + parity);
      const Complex u = std::polar(1.0, 0.5 * theta * n) * kIPow[k & 3];
      out[n] = u * Complex{x_re[k], x_im[k]};
    }
  }
  return out;
}

std::shared_ptr<const Squeezer> Squeezer::for_dim(int dim) {
  static std::mutex mutex;
  static std::map<int, std::shared_ptr<const Squeezer>> cache;
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(dim); it != cache.end()) return it->second;
  }
  auto built = std::make_shared<const Squeezer>(dim);
  std::lock_guard lock(mutex);
  return cache.emplace(dim, std::move(built)).first->second;
}

}  // namespace wvalab::fock
