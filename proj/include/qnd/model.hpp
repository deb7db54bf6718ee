#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "qnd/errors.hpp"

namespace qnd {

inline constexpr double kPi = std::numbers::pi;

// ---------------------------------------------------------------------------
// Unit scaling.
//
// The characteristic energy is E2r = hbar^2 k^2 / m (twice the recoil
// energy). Lengths are measured in 1/k, times in hbar/E2r, energies in E2r.
// In these units the kinetic term is -(1/2) d^2/dx^2 and the lattice has
// period pi, so the reciprocal lattice vector is 2 and the first Brillouin
// zone is q in [-1, 1).
// ---------------------------------------------------------------------------

struct PhysicalParams {
  double coupling = 0.0;       // atom-field coupling, energy units
  double detuning = 0.0;       // atom-field detuning, energy units (nonzero)
  double wavenumber = 0.0;     // cavity-mode wave number, 1/length
  double mass = 0.0;           // atomic mass
  double cavity_length = 0.0;  // mirror separation
  double hbar = 1.0;
};

struct Scaling {
  double energy;  // E2r
  double length;  // 1/k
  double time;    // hbar / E2r

  double to_dimensionless_energy(double e) const { return e / energy; }
  double to_dimensionless_length(double x) const { return x / length; }
  double to_dimensionless_time(double t) const { return t / time; }
  double from_dimensionless_energy(double e) const { return e * energy; }
  double from_dimensionless_length(double x) const { return x * length; }
  double from_dimensionless_time(double t) const { return t * time; }
};

struct ScaledParams {
  double g0;             // coupling / E2r
  double delta;          // detuning / E2r
  double cavity_length;  // k * physical length
  Scaling scaling;
};

inline ScaledParams scale_parameters(const PhysicalParams& p) {
  require(p.wavenumber > 0.0, ErrKind::invalid_parameter, "wavenumber must be positive");
  require(p.mass > 0.0, ErrKind::invalid_parameter, "mass must be positive");
  require(p.detuning != 0.0, ErrKind::invalid_parameter, "detuning must be nonzero");
  require(p.hbar > 0.0, ErrKind::invalid_parameter, "hbar must be positive");
  const double e2r = p.hbar * p.hbar * p.wavenumber * p.wavenumber / p.mass;
  Scaling s{e2r, 1.0 / p.wavenumber, p.hbar / e2r};
  return ScaledParams{p.coupling / e2r, p.detuning / e2r, p.cavity_length * p.wavenumber, s};
}

// ---------------------------------------------------------------------------
// Dispersive lattice depth U = g0^2 / delta (per photon).
// ---------------------------------------------------------------------------

inline double dispersive_depth(double g0, double delta) {
  require(delta != 0.0, ErrKind::invalid_parameter, "dispersive depth undefined for delta = 0");
  return g0 * g0 / delta;
}

// Dispersive-regime sanity: |delta| should dominate g0 sqrt(n).
inline bool dispersive_regime_ok(double g0, double delta, double n_max) {
  return std::abs(delta) >= 10.0 * std::abs(g0) * std::sqrt(std::max(0.0, n_max));
}

// ---------------------------------------------------------------------------
// Zone folding. The cos^2 lattice has period pi, hence reciprocal lattice
// vector 2. A free momentum p0 folds to q in [-1, 1) by an even shift, and
// the extended-zone band index is floor(|p0|) + 1 (band nu covers
// |p| in [nu-1, nu]). Both the band index and the shift are reported since
// they answer different questions.
// ---------------------------------------------------------------------------

struct FoldResult {
  int band;      // extended-zone band index, >= 1
  double q;      // quasi-momentum in [-1, 1)
  double shift;  // even integer with p0 = q + shift
};

inline FoldResult fold_momentum(double p0) {
  double shift = 2.0 * std::round(p0 / 2.0);
  double q = p0 - shift;
  if (q >= 1.0) {
    q -= 2.0;
    shift += 2.0;
  } else if (q < -1.0) {
    q += 2.0;
    shift -= 2.0;
  }
  const int band = static_cast<int>(std::floor(std::abs(p0))) + 1;
  return FoldResult{band, q, shift};
}

// ---------------------------------------------------------------------------
// Poisson photon statistics of a coherent field.
// ---------------------------------------------------------------------------

inline double poisson_pmf(double nbar, int n) {
  if (nbar == 0.0) return n == 0 ? 1.0 : 0.0;
  return std::exp(-nbar + n * std::log(nbar) - std::lgamma(n + 1.0));
}

// Smallest cutoff keeping all but `eps` of the coherent photon distribution.
inline int default_fock_cutoff(double nbar, double eps = 1e-8) {
  require(nbar >= 0.0, ErrKind::invalid_parameter, "nbar must be nonnegative");
  double cum = 0.0;
  for (int n = 0; n <= 4096; ++n) {
    cum += poisson_pmf(nbar, n);
    if (cum > 1.0 - eps) return n;
  }
  raise(ErrKind::cutoff, "Fock cutoff search exceeded 4096");
}

// ---------------------------------------------------------------------------
// Spatial grid. Points are x_i = x_min + i dx with dx = (x_max - x_min) / n,
// i = 0 .. n-1 (x_max itself excluded, Fourier convention).
// ---------------------------------------------------------------------------

struct GridSpec {
  double x_min = 0.0;
  double x_max = 0.0;
  int n_points = 0;

  double spacing() const { return (x_max - x_min) / n_points; }
  double point(int i) const { return x_min + i * spacing(); }

  void validate() const {
    require(n_points >= 16, ErrKind::invalid_parameter, "grid needs at least 16 points");
    require((n_points & (n_points - 1)) == 0, ErrKind::invalid_parameter,
            "grid n_points must be a power of two");
    require(x_max > x_min, ErrKind::invalid_parameter, "grid x_max must exceed x_min");
    require(spacing() <= 0.1 + 1e-12, ErrKind::invalid_parameter,
            "grid spacing must resolve the lattice period (dx <= 0.1)");
  }
};

// ---------------------------------------------------------------------------
// The single source of configuration truth, all quantities dimensionless.
// ---------------------------------------------------------------------------

struct SimulationParams {
  double g0 = 0.0;     // optional unless the two-level channel is used
  double delta = 0.0;  // optional, nonzero when given
  double U = 0.0;      // single-photon lattice depth
  double L = 0.0;      // cavity length
  double X_s = 0.0;    // envelope slope length
  double p0 = 0.0;     // mean initial momentum
  double dp = 0.0;     // momentum width (exclusive with dx_packet)
  double dx_packet = 0.0;
  double x0 = 0.0;     // initial packet center
  double nbar = 0.0;   // mean photon number
  int n_max = -1;      // Fock cutoff; -1 derives the default
  GridSpec grid;
  double dt = 0.01;
  double t_f = 0.0;
  std::uint64_t seed = 1;

  bool has_two_level() const { return delta != 0.0; }

  // Fills derived fields and checks every cross-field invariant. Call once
  // after construction; throws on violation.
  void finalize() {
    require(U >= 0.0, ErrKind::invalid_parameter, "U must be nonnegative");
    if (delta != 0.0 || g0 != 0.0) {
      require(delta != 0.0, ErrKind::invalid_parameter, "delta must be nonzero when g0 is set");
      const double u_implied = dispersive_depth(g0, delta);
      require(std::abs(u_implied - U) <= 1e-9 * std::max(1.0, std::abs(U)),
              ErrKind::invalid_parameter,
              "inconsistent (g0, delta, U): U must equal g0^2/delta");
    }
    require(L >= 20.0 * kPi, ErrKind::invalid_parameter,
            "L must be large compared with the lattice wavelength 2*pi");
    require(X_s > 0.0 && X_s <= L / 50.0, ErrKind::invalid_parameter,
            "X_s must be positive and small compared with L");

    const bool have_dp = dp > 0.0;
    const bool have_dx = dx_packet > 0.0;
    require(have_dp != have_dx, ErrKind::invalid_parameter,
            "exactly one of dp / dx_packet must be given");
    if (have_dp)
      dx_packet = 0.5 / dp;  // minimum-uncertainty pair
    else
      dp = 0.5 / dx_packet;

    require(nbar >= 0.0, ErrKind::invalid_parameter, "nbar must be nonnegative");
    if (n_max < 0) {
      n_max = default_fock_cutoff(nbar);
    } else {
      double cum = 0.0;
      for (int n = 0; n <= n_max; ++n) cum += poisson_pmf(nbar, n);
      require(cum > 1.0 - 1e-8, ErrKind::cutoff,
              "n_max truncates more than 1e-8 of the coherent field");
    }

    require(dt > 0.0, ErrKind::invalid_parameter, "dt must be positive");
    require(t_f > 0.0, ErrKind::invalid_parameter, "t_f must be positive");

    grid.validate();
    require(grid.x_min < x0 - 5.0 * dx_packet, ErrKind::invalid_parameter,
            "grid x_min must leave room for the initial packet");
    // No-wrap bound on the forward side: nothing travels faster than p0 on
    // average, so x0 + p0 t_f plus spreading bounds the reach. The propagator
    // additionally monitors probability near the edges at run time.
    const double sigma_t =
        std::sqrt(dx_packet * dx_packet +
                  (t_f / (2.0 * dx_packet)) * (t_f / (2.0 * dx_packet)));
    require(grid.x_max > std::max(x0 + p0 * t_f + 5.0 * sigma_t, L / 2.0),
            ErrKind::invalid_parameter,
            "grid x_max too small: forward packet would reach the boundary");
  }
};

}  // namespace qnd
