#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <functional>
#include <span>
#include <vector>

#include "qnd/errors.hpp"
#include "qnd/model.hpp"

namespace qnd {

// ---------------------------------------------------------------------------
// Periodic eigenproblem of the dispersive lattice Un cos^2(x), solved by
// plane-wave diagonalization. In the basis e^{i(q+2m)x}, |m| <= M, the
// Hamiltonian is real symmetric tridiagonal:
//   diagonal      (q+2m)^2/2 + Un/2
//   off-diagonal  Un/4
// since cos^2 x = 1/2 + (e^{2ix} + e^{-2ix})/4.
// ---------------------------------------------------------------------------

struct BlochSolution {
  double depth = 0.0;  // Un
  int cutoff = 0;      // plane-wave components per side (M)
  int n_bands = 0;
  std::vector<double> q_grid;
  std::vector<double> energies;  // [band-1][iq] -> energies[(band-1)*nq + iq]
  std::vector<double> vectors;   // [iq][band-1][m+M], orthonormal per q

  int basis_size() const { return 2 * cutoff + 1; }

  double energy(int band, int iq) const { return energies[(band - 1) * q_grid.size() + iq]; }

  std::span<const double> eigenvector(int band, int iq) const {
    const int nb = basis_size();
    return {vectors.data() + (static_cast<std::size_t>(iq) * n_bands + (band - 1)) * nb,
            static_cast<std::size_t>(nb)};
  }
};

namespace detail {

// Diagonalize at one quasi-momentum. Returns eigenvalues ascending; fills
// `vectors` (column = band) when requested. Eigenvector sign is fixed by
// making the first nonzero coefficient, scanning m = 0, +1, -1, +2, -2, ...,
// positive so decompositions are deterministic.
inline void diagonalize_q(double depth, int cutoff, double q, Eigen::VectorXd& evals,
                          Eigen::MatrixXd* vectors) {
  const int nb = 2 * cutoff + 1;
  Eigen::VectorXd diag(nb), sub(nb - 1);
  for (int j = 0; j < nb; ++j) {
    const double pj = q + 2.0 * (j - cutoff);
    diag[j] = 0.5 * pj * pj + 0.5 * depth;
  }
  sub.setConstant(0.25 * depth);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub,
                                vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  require(solver.info() == Eigen::Success, ErrKind::accuracy, "tridiagonal eigensolve failed");
  evals = solver.eigenvalues();
  if (vectors) {
    *vectors = solver.eigenvectors();
    for (int b = 0; b < nb; ++b) {
      double lead = 0.0;
      for (int k = 0; k < nb; ++k) {
        const int m = (k % 2 == 0) ? k / 2 : -(k + 1) / 2;  // 0, +1, -1, +2, -2, ...
        const double c = (*vectors)(cutoff + m, b);
        if (std::abs(c) > 1e-12) {
          lead = c;
          break;
        }
      }
      if (lead < 0.0) vectors->col(b) *= -1.0;
    }
  }
}

inline double band_energy_at(double depth, int cutoff, int band, double q) {
  Eigen::VectorXd evals;
  diagonalize_q(depth, cutoff, q, evals, nullptr);
  return evals[band - 1];
}

}  // namespace detail

// Uniform zone grid q_i = -1 + 2 i / n, i = 0 .. n-1 (endpoint +1 excluded,
// it duplicates -1).
inline std::vector<double> zone_grid(int n_points = 512) {
  require(n_points >= 8, ErrKind::invalid_parameter, "zone grid too small");
  std::vector<double> q(n_points);
  for (int i = 0; i < n_points; ++i) q[i] = -1.0 + 2.0 * i / n_points;
  return q;
}

// Solves the band structure on `q_grid`. The plane-wave cutoff starts at
// `cutoff` (at least n_bands + 8) and doubles until the top requested band is
// converged: adding 4 more components must shift no energy by more than 1e-8.
inline BlochSolution solve_bands(double depth, std::vector<double> q_grid, int n_bands,
                                 int cutoff = 32) {
  require(depth >= 0.0, ErrKind::invalid_parameter, "lattice depth must be nonnegative");
  require(n_bands >= 1, ErrKind::invalid_parameter, "need at least one band");
  require(!q_grid.empty(), ErrKind::invalid_parameter, "empty q grid");
  for (double q : q_grid)
    require(q >= -1.0 && q < 1.0, ErrKind::invalid_parameter, "q grid point outside [-1, 1)");

  int m = std::max(cutoff, n_bands + 8);
  constexpr int kMaxCutoff = 4096;
  for (;; m *= 2) {
    require(m <= kMaxCutoff, ErrKind::accuracy,
            "plane-wave cutoff did not converge the requested bands");
    // Convergence probe on a zone sample: compare top band at m and m + 4.
    double worst = 0.0;
    for (double q : {-1.0, -0.5, 0.0, 0.5}) {
      const double a = detail::band_energy_at(depth, m, n_bands, q);
      const double b = detail::band_energy_at(depth, m + 4, n_bands, q);
      worst = std::max(worst, std::abs(a - b));
    }
    if (worst <= 1e-8) break;
  }

  BlochSolution sol;
  sol.depth = depth;
  sol.cutoff = m;
  sol.n_bands = n_bands;
  sol.q_grid = std::move(q_grid);
  const std::size_t nq = sol.q_grid.size();
  const int nb = sol.basis_size();
  sol.energies.resize(static_cast<std::size_t>(n_bands) * nq);
  sol.vectors.resize(nq * n_bands * nb);

  Eigen::VectorXd evals;
  Eigen::MatrixXd vecs;
  for (std::size_t iq = 0; iq < nq; ++iq) {
    detail::diagonalize_q(depth, m, sol.q_grid[iq], evals, &vecs);
    for (int b = 0; b < n_bands; ++b) {
      sol.energies[static_cast<std::size_t>(b) * nq + iq] = evals[b];
      double* dst = sol.vectors.data() + (iq * n_bands + b) * nb;
      for (int k = 0; k < nb; ++k) dst[k] = vecs(k, b);
    }
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Band-local dispersion data. Derivatives are evaluated exactly from the
// eigenpairs at q0: dE/dq by the Hellmann-Feynman identity
//   v_g = sum_m |c_m|^2 (q0 + 2m)
// and d^2E/dq^2 by the effective-mass sum rule
//   1/m* = 1 + 2 sum_{b' != b} |<phi_b'| p |phi_b>|^2 / (E_b - E_b'),
// both exact for the truncated plane-wave Hamiltonian.
// ---------------------------------------------------------------------------

struct BandPoint {
  int band;
  double q;
  double energy;
  double group_velocity;
  double inv_effective_mass;
};

inline BandPoint band_point(const BlochSolution& sol, int band, double q0) {
  require(band >= 1 && band <= sol.n_bands, ErrKind::invalid_parameter,
          "band index not solved in this BlochSolution");
  require(q0 >= -1.0 && q0 < 1.0, ErrKind::invalid_parameter,
          "q0 outside the first Brillouin zone; fold it first");

  const int m = sol.cutoff;
  const int nb = 2 * m + 1;
  Eigen::VectorXd evals;
  Eigen::MatrixXd vecs;
  detail::diagonalize_q(sol.depth, m, q0, evals, &vecs);

  const double e = evals[band - 1];
  double vg = 0.0;
  for (int k = 0; k < nb; ++k) {
    const double pk = q0 + 2.0 * (k - m);
    const double c = vecs(k, band - 1);
    vg += c * c * pk;
  }
  double inv_mass = 1.0;
  for (int b = 0; b < nb; ++b) {
    if (b == band - 1) continue;
    double me = 0.0;
    for (int k = 0; k < nb; ++k) me += vecs(k, b) * (q0 + 2.0 * (k - m)) * vecs(k, band - 1);
    inv_mass += 2.0 * me * me / (e - evals[b]);
  }
  return BandPoint{band, q0, e, vg, inv_mass};
}

// ---------------------------------------------------------------------------
// Bloch decomposition of a momentum-space packet psi(p): the amplitude on
// band nu at quasi-momentum q is  d_nu(q) = sum_m c_m^{nu,q} psi(q + 2m),
// and completeness gives  sum_nu integral |d_nu(q)|^2 dq = 1.
// ---------------------------------------------------------------------------

struct BandDecomposition {
  std::vector<double> weights;                    // per band, integral of |d|^2
  std::vector<std::complex<double>> amplitudes;   // [band-1][iq]
  double total = 0.0;
};

inline BandDecomposition decompose_packet(const std::function<std::complex<double>(double)>& psi_p,
                                          const BlochSolution& sol, double support_tol = 1e-10) {
  const std::size_t nq = sol.q_grid.size();
  require(nq >= 2, ErrKind::invalid_parameter, "decomposition needs a q grid");
  const double dq = sol.q_grid[1] - sol.q_grid[0];

  // The solved bands cover extended momenta |p| <= n_bands; probe the packet
  // just outside that range to detect support overflow.
  const double edge = static_cast<double>(sol.n_bands);
  double outside = 0.0;
  for (double p : {-edge - 0.5, edge + 0.5, -edge - 1.5, edge + 1.5})
    outside = std::max(outside, std::norm(psi_p(p)));
  require(outside < support_tol, ErrKind::cutoff,
          "packet momentum support exceeds the solved band range");

  BandDecomposition dec;
  dec.weights.assign(sol.n_bands, 0.0);
  dec.amplitudes.resize(static_cast<std::size_t>(sol.n_bands) * nq);
  const int m = sol.cutoff;
  const int nb = 2 * m + 1;
  for (std::size_t iq = 0; iq < nq; ++iq) {
    const double q = sol.q_grid[iq];
    // Evaluate the packet at every reciprocal image of q once.
    std::vector<std::complex<double>> pk(nb);
    for (int k = 0; k < nb; ++k) pk[k] = psi_p(q + 2.0 * (k - m));
    for (int b = 1; b <= sol.n_bands; ++b) {
      auto vec = sol.eigenvector(b, static_cast<int>(iq));
      std::complex<double> d = 0.0;
      for (int k = 0; k < nb; ++k) d += vec[k] * pk[k];
      dec.amplitudes[static_cast<std::size_t>(b - 1) * nq + iq] = d;
      dec.weights[b - 1] += std::norm(d) * dq;
    }
  }
  for (double w : dec.weights) dec.total += w;
  return dec;
}

// ---------------------------------------------------------------------------
// Energy-matched quasi-momentum: the zone point on `band` whose energy equals
// E, on the branch carrying positive group velocity. E_nu(q) is even in q and
// monotone in |q| over the half zone, so bisection on u = |q| suffices; the
// positive-velocity branch has q = +u for odd bands and q = -u for even ones
// (free-limit continuation of p > 0).
// ---------------------------------------------------------------------------

inline double energy_matched_q(const BlochSolution& sol, int band, double e_target) {
  require(band >= 1 && band <= sol.n_bands, ErrKind::invalid_parameter, "band not solved");
  const double sign = (band % 2 == 1) ? 1.0 : -1.0;
  auto energy_at_u = [&](double u) {
    double q = sign * u;
    if (q >= 1.0) q = std::nextafter(1.0, 0.0);
    if (q < -1.0) q = -1.0;
    return detail::band_energy_at(sol.depth, sol.cutoff, band, q);
  };
  double lo = 0.0, hi = 1.0 - 1e-12;
  double elo = energy_at_u(lo), ehi = energy_at_u(hi);
  const double emin = std::min(elo, ehi), emax = std::max(elo, ehi);
  require(e_target >= emin - 1e-12 && e_target <= emax + 1e-12, ErrKind::invalid_parameter,
          "energy outside the band range: no propagating state");
  const bool increasing = ehi > elo;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double em = energy_at_u(mid);
    if ((em < e_target) == increasing)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-13) break;
  }
  return sign * 0.5 * (lo + hi);
}

}  // namespace qnd
