#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "qnd/errors.hpp"
#include "qnd/model.hpp"

namespace qnd {

// Fock-space state of the cavity field, amplitudes c_n for n = 0 .. n_max.
class FieldState {
 public:
  explicit FieldState(std::vector<std::complex<double>> amplitudes)
      : c_(std::move(amplitudes)) {
    require(!c_.empty(), ErrKind::invalid_parameter, "empty field state");
    renormalize();
  }

  // Coherent state, c_n = e^{-|a|^2/2} a^n / sqrt(n!), truncated at n_max and
  // renormalized. Factorials go through log-gamma so large cutoffs are safe.
  static FieldState coherent(std::complex<double> alpha, int n_max) {
    require(n_max >= 0, ErrKind::invalid_parameter, "n_max must be nonnegative");
    const double a2 = std::norm(alpha);
    const double phase = std::arg(alpha);
    std::vector<std::complex<double>> c(n_max + 1);
    double kept = 0.0;
    for (int n = 0; n <= n_max; ++n) {
      const double ln_mag =
          -0.5 * a2 + (a2 > 0.0 ? 0.5 * n * std::log(a2) : (n == 0 ? 0.0 : -1e308)) -
          0.5 * std::lgamma(n + 1.0);
      const double mag = std::exp(ln_mag);
      c[n] = std::polar(mag, phase * n);
      kept += mag * mag;
    }
    require(1.0 - kept < 1e-8, ErrKind::cutoff,
            "Fock cutoff truncates more than 1e-8 of the coherent state");
    return FieldState(std::move(c));
  }

  int cutoff() const { return static_cast<int>(c_.size()) - 1; }

  std::span<const std::complex<double>> amplitudes() const { return c_; }
  std::complex<double> amplitude(int n) const { return c_[n]; }

  std::vector<double> probabilities() const {
    std::vector<double> p(c_.size());
    for (std::size_t n = 0; n < c_.size(); ++n) p[n] = std::norm(c_[n]);
    return p;
  }

  double mean_photon() const {
    double s = 0.0;
    for (std::size_t n = 0; n < c_.size(); ++n) s += n * std::norm(c_[n]);
    return s;
  }

  double norm_sq() const {
    double s = 0.0;
    for (const auto& a : c_) s += std::norm(a);
    return s;
  }

  void renormalize() {
    const double n2 = norm_sq();
    require(n2 > 0.0, ErrKind::zero_likelihood, "field state has zero norm");
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& a : c_) a *= inv;
  }

 private:
  std::vector<std::complex<double>> c_;
};

// Shannon entropy of a probability vector, with 0 ln 0 = 0. This is also the
// entanglement ceiling S_max = -sum |c_n|^2 ln |c_n|^2 of a product state.
inline double shannon_entropy(std::span<const double> p) {
  double s = 0.0;
  for (double x : p)
    if (x > 0.0) s -= x * std::log(x);
  return s;
}

// Von Neumann entropy -Tr rho ln rho of a Hermitian, unit-trace matrix.
// Eigenvalues in [-1e-10, 0) are clamped to zero; anything more negative or a
// trace off by more than 1e-6 is rejected.
inline double von_neumann_entropy(const Eigen::MatrixXcd& rho) {
  require(rho.rows() == rho.cols() && rho.rows() > 0, ErrKind::invalid_parameter,
          "density matrix must be square");
  const double asym = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  require(asym <= 1e-8, ErrKind::invalid_parameter, "density matrix is not Hermitian");
  const double tr = rho.trace().real();
  require(std::abs(tr - 1.0) <= 1e-6, ErrKind::invalid_parameter,
          "density matrix trace deviates from 1");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(0.5 * (rho + rho.adjoint()),
                                                         Eigen::EigenvaluesOnly);
  require(solver.info() == Eigen::Success, ErrKind::accuracy, "entropy eigensolve failed");
  double s = 0.0;
  for (double lam : solver.eigenvalues()) {
    require(lam >= -1e-10, ErrKind::invalid_parameter,
            "density matrix has a significantly negative eigenvalue");
    if (lam > 0.0) s -= lam * std::log(lam);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Husimi Q-function, Q(alpha) = |<alpha|phi>|^2 / pi.
// ---------------------------------------------------------------------------

struct PhaseSpaceGrid {
  double re_min = -4.0, re_max = 4.0;
  double im_min = -4.0, im_max = 4.0;
  int n_re = 201, n_im = 201;

  double re(int i) const { return re_min + (re_max - re_min) * i / (n_re - 1); }
  double im(int j) const { return im_min + (im_max - im_min) * j / (n_im - 1); }
  double cell_area() const {
    return (re_max - re_min) / (n_re - 1) * (im_max - im_min) / (n_im - 1);
  }
};

inline double husimi_q_point(const FieldState& state, std::complex<double> alpha) {
  // <alpha|phi> = e^{-|alpha|^2/2} sum_n c_n conj(alpha)^n / sqrt(n!)
  std::complex<double> term = 1.0;
  std::complex<double> acc = state.amplitude(0);
  const std::complex<double> ac = std::conj(alpha);
  for (int n = 1; n <= state.cutoff(); ++n) {
    term *= ac / std::sqrt(static_cast<double>(n));
    acc += state.amplitude(n) * term;
  }
  const double mag2 = std::norm(acc) * std::exp(-std::norm(alpha));
  return mag2 / kPi;
}

// Row-major over the grid: value index i_re * n_im + i_im.
inline std::vector<double> husimi_q(const FieldState& state, const PhaseSpaceGrid& grid) {
  require(grid.n_re >= 2 && grid.n_im >= 2, ErrKind::invalid_parameter, "Q grid too small");
  std::vector<double> q(static_cast<std::size_t>(grid.n_re) * grid.n_im);
  for (int i = 0; i < grid.n_re; ++i)
    for (int j = 0; j < grid.n_im; ++j)
      q[static_cast<std::size_t>(i) * grid.n_im + j] =
          husimi_q_point(state, {grid.re(i), grid.im(j)});
  return q;
}

}  // namespace qnd
