#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

#include "qnd/bloch.hpp"
#include "qnd/errors.hpp"
#include "qnd/field.hpp"
#include "qnd/model.hpp"

namespace qnd {

// ---------------------------------------------------------------------------
// Ideal single-band model: each photon number n evolves the initial Gaussian
// on one Bloch band of depth U n, so the packet keeps its Gaussian shape,
// drifts at the band group velocity and spreads with the effective mass.
// ---------------------------------------------------------------------------

struct MomentumGaussian {
  double p0;
  double dp;

  double operator()(double p) const {
    const double z = (p - p0) / (2.0 * dp);
    return std::pow(2.0 * kPi * dp * dp, -0.25) * std::exp(-z * z);
  }
};

inline MomentumGaussian initial_packet(double p0, double dp) {
  require(dp > 0.0, ErrKind::invalid_parameter, "dp must be positive");
  return MomentumGaussian{p0, dp};
}

// One photon-number component at a fixed time. width_sq is the complex
// squared width  1/(4 dp^2) + i t / (2 m*); its real part is constant in
// time, which keeps the closed form normalized at all t.
struct GaussianComponent {
  int n = 0;
  double time = 0.0;
  double center = 0.0;  // v_g t
  std::complex<double> width_sq{0.0, 0.0};
  double group_velocity = 0.0;
  double inv_mstar = 1.0;
  double dp = 0.0;

  double sigma_sq() const { return std::norm(width_sq) / width_sq.real(); }

  double density(double x) const {
    const double s2 = sigma_sq();
    const double z = x - center;
    return std::exp(-z * z / (2.0 * s2)) / std::sqrt(2.0 * kPi * s2);
  }

  std::complex<double> amplitude(double x) const {
    const std::complex<double> pref =
        std::pow(8.0 * kPi * dp * dp * width_sq * width_sq, -0.25);
    const double z = x - center;
    return pref * std::exp(-z * z / (4.0 * width_sq));
  }
};

// Evolves photon-number component n to time t on the band selected by folding
// p0. `bands` must hold the solution for depth U*n.
inline GaussianComponent evolve_component(int n, double t, const SimulationParams& params,
                                          const BlochSolution& bands) {
  require(std::abs(bands.depth - params.U * n) <= 1e-9 * std::max(1.0, params.U * n),
          ErrKind::invalid_parameter, "BlochSolution depth does not match U*n");
  const FoldResult fold = fold_momentum(params.p0);
  require(fold.band <= bands.n_bands, ErrKind::invalid_parameter,
          "requested band not present in BlochSolution");
  const BandPoint bp = band_point(bands, fold.band, fold.q);
  GaussianComponent comp;
  comp.n = n;
  comp.time = t;
  comp.dp = params.dp;
  comp.group_velocity = bp.group_velocity;
  comp.inv_mstar = bp.inv_effective_mass;
  comp.center = bp.group_velocity * t;
  comp.width_sq = {1.0 / (4.0 * params.dp * params.dp), 0.5 * t * bp.inv_effective_mass};
  return comp;
}

struct AtomFieldState {
  double time = 0.0;
  std::vector<GaussianComponent> components;        // index = photon number n
  std::vector<std::complex<double>> amplitudes;     // c_n
};

// Builds all components n = 0 .. n_max at time t. One small eigensolve per
// photon number; solutions are not reused across n because the depth differs.
inline AtomFieldState make_atom_field_state(const SimulationParams& params,
                                            const FieldState& field, double t) {
  const FoldResult fold = fold_momentum(params.p0);
  AtomFieldState state;
  state.time = t;
  state.amplitudes.assign(field.amplitudes().begin(), field.amplitudes().end());
  state.components.reserve(field.cutoff() + 1);
  for (int n = 0; n <= field.cutoff(); ++n) {
    BlochSolution sol = solve_bands(params.U * n, {fold.q}, fold.band + 2);
    state.components.push_back(evolve_component(n, t, params, sol));
  }
  return state;
}

// rho_at(x) = sum_n |c_n|^2 |psi_n(x)|^2 on the given grid. Fails when the
// grid cannot resolve the narrowest component.
inline std::vector<double> atomic_density(const AtomFieldState& state,
                                          const std::vector<double>& x_grid) {
  require(x_grid.size() >= 2, ErrKind::invalid_parameter, "density grid too small");
  const double dx = x_grid[1] - x_grid[0];
  double min_sigma = 1e300;
  for (const auto& c : state.components) min_sigma = std::min(min_sigma, std::sqrt(c.sigma_sq()));
  require(min_sigma / dx >= 4.0, ErrKind::resolution,
          "grid spacing too coarse for the narrowest packet");

  std::vector<double> rho(x_grid.size(), 0.0);
  for (std::size_t n = 0; n < state.components.size(); ++n) {
    const double w = std::norm(state.amplitudes[n]);
    if (w == 0.0) continue;
    for (std::size_t i = 0; i < x_grid.size(); ++i)
      rho[i] += w * state.components[n].density(x_grid[i]);
  }
  return rho;
}

// Closed-form overlap <psi_a|psi_b> of two evolved Gaussian components
// (product of two Gaussians; no quadrature).
inline std::complex<double> component_overlap(const GaussianComponent& a,
                                              const GaussianComponent& b) {
  const std::complex<double> wa = std::conj(a.width_sq);
  const std::complex<double> wb = b.width_sq;
  const std::complex<double> ca = 1.0 / (4.0 * wa);
  const std::complex<double> cb = 1.0 / (4.0 * wb);
  const std::complex<double> pref = std::conj(std::pow(8.0 * kPi * a.dp * a.dp * a.width_sq * a.width_sq, -0.25)) *
                                    std::pow(8.0 * kPi * b.dp * b.dp * b.width_sq * b.width_sq, -0.25);
  const double d = a.center - b.center;
  return pref * std::sqrt(kPi / (ca + cb)) * std::exp(-ca * cb * d * d / (ca + cb));
}

// Gram matrix O(m, n) = <psi_m|psi_n>; Hermitian with unit diagonal.
inline Eigen::MatrixXcd overlap_matrix(const AtomFieldState& state) {
  const int n = static_cast<int>(state.components.size());
  Eigen::MatrixXcd o(n, n);
  for (int i = 0; i < n; ++i) {
    o(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      o(i, j) = component_overlap(state.components[i], state.components[j]);
      o(j, i) = std::conj(o(i, j));
    }
  }
  return o;
}

// Reduced field density matrix (rho_f)_{nm} = c_n conj(c_m) <psi_m|psi_n>.
inline Eigen::MatrixXcd field_density_matrix(const AtomFieldState& state) {
  const int n = static_cast<int>(state.components.size());
  double norm = 0.0;
  for (const auto& c : state.amplitudes) norm += std::norm(c);
  require(std::abs(norm - 1.0) <= 1e-8, ErrKind::invalid_parameter,
          "field amplitudes must be normalized");
  const Eigen::MatrixXcd o = overlap_matrix(state);
  Eigen::MatrixXcd rho(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      rho(i, j) = state.amplitudes[i] * std::conj(state.amplitudes[j]) * o(j, i);
  return rho;
}

inline double field_entropy(const AtomFieldState& state) {
  return von_neumann_entropy(field_density_matrix(state));
}

struct EntropySample {
  double t;
  double entropy;
  double entropy_max;
};

// S_f(t) along a time grid, together with the ceiling S_max fixed by the
// initial photon distribution.
inline std::vector<EntropySample> entropy_trajectory(const SimulationParams& params,
                                                     const FieldState& field,
                                                     const std::vector<double>& times) {
  const double s_max = shannon_entropy(field.probabilities());
  // Band data is time-independent; evolve the t = 0 state and rescale widths.
  AtomFieldState base = make_atom_field_state(params, field, 0.0);
  std::vector<EntropySample> out;
  out.reserve(times.size());
  for (double t : times) {
    AtomFieldState st = base;
    st.time = t;
    for (auto& c : st.components) {
      c.time = t;
      c.center = c.group_velocity * t;
      c.width_sq = {c.width_sq.real(), 0.5 * t * c.inv_mstar};
    }
    out.push_back({t, field_entropy(st), s_max});
  }
  return out;
}

}  // namespace qnd
