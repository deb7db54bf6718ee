#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <vector>

#include "qnd/errors.hpp"
#include "qnd/fft.hpp"
#include "qnd/model.hpp"

namespace qnd {

// ---------------------------------------------------------------------------
// Wavefunction on a uniform grid. The norm uses the grid quadrature
// sum |psi_i|^2 dx (equal to the trapezoid rule for the compactly supported
// states propagated here).
// ---------------------------------------------------------------------------

struct Wavefunction {
  GridSpec grid;
  std::vector<std::complex<double>> values;

  double norm_sq() const {
    double s = 0.0;
    for (const auto& v : values) s += std::norm(v);
    return s * grid.spacing();
  }

  double norm() const { return std::sqrt(norm_sq()); }

  void normalize() {
    const double n = norm();
    require(n > 0.0, ErrKind::invalid_parameter, "cannot normalize a zero wavefunction");
    for (auto& v : values) v /= n;
  }

  double mean_x() const {
    double s = 0.0, w = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double d = std::norm(values[i]);
      s += d * grid.point(static_cast<int>(i));
      w += d;
    }
    require(w > 0.0, ErrKind::invalid_parameter, "zero wavefunction");
    return s / w;
  }

  std::vector<double> density() const {
    std::vector<double> d(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) d[i] = std::norm(values[i]);
    return d;
  }
};

// Minimum-uncertainty packet centered at x0 with mean momentum p0 and
// position width sigma_x, normalized on the grid.
inline Wavefunction gaussian_packet(const GridSpec& grid, double x0, double p0, double sigma_x) {
  require(sigma_x > 0.0, ErrKind::invalid_parameter, "sigma_x must be positive");
  Wavefunction psi{grid, std::vector<std::complex<double>>(grid.n_points)};
  const double pref = std::pow(2.0 * kPi * sigma_x * sigma_x, -0.25);
  for (int i = 0; i < grid.n_points; ++i) {
    const double x = grid.point(i);
    const double z = (x - x0) / (2.0 * sigma_x);
    psi.values[i] = std::polar(pref * std::exp(-z * z), p0 * (x - x0));
  }
  psi.normalize();
  return psi;
}

// ---------------------------------------------------------------------------
// Cavity potential with a tanh envelope:
//   V_n(x) = U n cos^2(x) w(x),
//   w(x) = [tanh((x + L/2)/X_s) - tanh((x - L/2)/X_s)] / 2,
// so w ~ 1 deep inside, exactly 1/2 at the mirrors, 0 far outside.
// ---------------------------------------------------------------------------

struct EnvelopePotential {
  double amplitude = 0.0;  // U * n
  double length = 0.0;     // L
  double slope = 0.0;      // X_s

  double envelope(double x) const {
    return 0.5 * (std::tanh((x + 0.5 * length) / slope) - std::tanh((x - 0.5 * length) / slope));
  }

  double operator()(double x) const {
    if (amplitude == 0.0) return 0.0;
    const double c = std::cos(x);
    return amplitude * c * c * envelope(x);
  }
};

inline EnvelopePotential envelope_potential(double u, int n, double l, double x_s) {
  require(n >= 0, ErrKind::invalid_parameter, "photon number must be nonnegative");
  require(u * n >= 0.0, ErrKind::invalid_parameter, "lattice amplitude must be nonnegative");
  require(x_s > 0.0, ErrKind::invalid_parameter, "X_s must be positive");
  require(x_s <= l / 50.0, ErrKind::invalid_parameter, "X_s must be small compared with L");
  return EnvelopePotential{u * n, l, x_s};
}

// ---------------------------------------------------------------------------
// Observable log along a propagation. Full-grid means sit next to means over
// the forward window x >= forward_cut, which excludes the back-scattered
// packet (only detected atoms count).
// ---------------------------------------------------------------------------

struct TrajectoryLog {
  std::vector<double> t;
  std::vector<double> norm;
  std::vector<double> x_mean, p_mean;
  std::vector<double> energy;
  std::vector<double> forward_fraction;
  std::vector<double> x_fwd, p_fwd;
};

struct PropagateOptions {
  double dt = 0.01;
  double sample_every = 1.0;
  double forward_cut = -std::numeric_limits<double>::infinity();
  double boundary_tol = 1e-6;
  int boundary_cells = 16;
};

struct PropagationResult {
  Wavefunction psi;
  TrajectoryLog log;
};

namespace detail {

// FFT momentum ordering: p_k = 2 pi k / (N dx) for k < N/2, negative branch
// above.
inline std::vector<double> momentum_grid(const GridSpec& grid) {
  const int n = grid.n_points;
  const double dp = 2.0 * kPi / (n * grid.spacing());
  std::vector<double> p(n);
  for (int k = 0; k < n; ++k) p[k] = dp * (k < n / 2 ? k : k - n);
  return p;
}

struct SampleStats {
  double norm_sq, x_mean, p_mean, kinetic, fwd_fraction, x_fwd, p_fwd;
};

// Momentum-space statistics of the buffer currently held in `scratch`
// (position representation); the scratch content is destroyed.
inline void momentum_stats(Fft1D& scratch, const std::vector<double>& p, double& p_mean,
                           double& kinetic, double& norm_sq_p) {
  scratch.forward();
  auto* f = scratch.data();
  double sp = 0.0, sk = 0.0, sn = 0.0;
  const std::size_t n = scratch.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double d = std::norm(f[k]);
    sn += d;
    sp += d * p[k];
    sk += d * 0.5 * p[k] * p[k];
  }
  p_mean = sp / sn;
  kinetic = sk / sn;
  norm_sq_p = sn;
}

}  // namespace detail

// One Strang step  e^{-iV dt/2} e^{-iT dt} e^{-iV dt/2}  with the kinetic
// factor applied in momentum space. Convenience entry point; plans its FFT on
// every call, so use propagate() for long runs.
inline Wavefunction split_step(const Wavefunction& psi, const std::function<double(double)>& v,
                               double dt) {
  require(dt > 0.0, ErrKind::invalid_parameter, "dt must be positive");
  const int n = psi.grid.n_points;
  Fft1D fft(n);
  const auto p = detail::momentum_grid(psi.grid);
  std::copy(psi.values.begin(), psi.values.end(), fft.data());
  for (int i = 0; i < n; ++i)
    fft.data()[i] *= std::polar(1.0, -0.5 * dt * v(psi.grid.point(i)));
  fft.forward();
  const double inv_n = 1.0 / n;
  for (int k = 0; k < n; ++k)
    fft.data()[k] *= std::polar(inv_n, -0.5 * dt * p[k] * p[k]);
  fft.backward();
  for (int i = 0; i < n; ++i)
    fft.data()[i] *= std::polar(1.0, -0.5 * dt * v(psi.grid.point(i)));
  Wavefunction out{psi.grid, std::vector<std::complex<double>>(fft.data(), fft.data() + n)};
  return out;
}

// Full propagation under a static potential. Phase tables are precomputed
// once; interior steps merge the two adjacent half potential kicks, so each
// step costs two FFTs plus one or two complex multiplies per point.
inline PropagationResult propagate(const Wavefunction& psi0,
                                   const std::function<double(double)>& potential, double t_f,
                                   const PropagateOptions& opts = {}) {
  psi0.grid.validate();
  require(opts.dt > 0.0 && t_f > 0.0, ErrKind::invalid_parameter, "dt and t_f must be positive");
  const double steps_f = t_f / opts.dt;
  const long long steps_total = std::llround(steps_f);
  require(std::abs(steps_f - steps_total) < 1e-6, ErrKind::invalid_parameter,
          "t_f must be an integer number of time steps");
  const double block_f = opts.sample_every / opts.dt;
  const long long block = std::llround(block_f);
  require(block >= 1 && std::abs(block_f - block) < 1e-6, ErrKind::invalid_parameter,
          "sample_every must be an integer number of time steps");
  require(steps_total % block == 0, ErrKind::invalid_parameter,
          "t_f must be a multiple of sample_every");

  const int n = psi0.grid.n_points;
  const double dx = psi0.grid.spacing();
  const auto p = detail::momentum_grid(psi0.grid);

  std::vector<double> v(n);
  double v_max = 0.0;
  for (int i = 0; i < n; ++i) {
    v[i] = potential(psi0.grid.point(i));
    v_max = std::max(v_max, std::abs(v[i]));
  }

  const double inv_n = 1.0 / n;
  std::vector<std::complex<double>> exp_v_half(n), exp_v_full(n), exp_t(n);
  for (int i = 0; i < n; ++i) {
    exp_v_half[i] = std::polar(1.0, -0.5 * opts.dt * v[i]);
    exp_v_full[i] = std::polar(1.0, -opts.dt * v[i]);
  }
  for (int k = 0; k < n; ++k) exp_t[k] = std::polar(inv_n, -0.5 * opts.dt * p[k] * p[k]);

  Fft1D work(n), scratch(n);
  std::copy(psi0.values.begin(), psi0.values.end(), work.data());
  auto* w = work.data();

  TrajectoryLog log;
  const std::size_t fwd_start = [&] {
    std::size_t i = 0;
    while (i < static_cast<std::size_t>(n) && psi0.grid.point(static_cast<int>(i)) < opts.forward_cut) ++i;
    return i;
  }();

  auto sample = [&](double t_now) {
    // Position-space statistics.
    double sn = 0.0, sx = 0.0, sv = 0.0, sfn = 0.0, sfx = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = std::norm(w[i]);
      const double x = psi0.grid.point(i);
      sn += d;
      sx += d * x;
      sv += d * v[i];
      if (static_cast<std::size_t>(i) >= fwd_start) {
        sfn += d;
        sfx += d * x;
      }
    }
    require(sn > 0.0, ErrKind::accuracy, "state vanished during propagation");

    // Boundary-leak guard: no probability may accumulate near the edges.
    double leak = 0.0;
    for (int i = 0; i < opts.boundary_cells; ++i)
      leak += std::norm(w[i]) + std::norm(w[n - 1 - i]);
    require(leak * dx / (sn * dx) <= opts.boundary_tol, ErrKind::boundary_leak,
            "probability reached the grid boundary; enlarge the grid");

    // Momentum statistics of the full state.
    std::copy(w, w + n, scratch.data());
    double p_mean, kin, np;
    detail::momentum_stats(scratch, p, p_mean, kin, np);

    // Forward-window statistics.
    double pf = 0.0, xf = 0.0;
    if (sfn > 0.0) {
      std::fill(scratch.data(), scratch.data() + fwd_start, std::complex<double>(0.0));
      std::copy(w + fwd_start, w + n, scratch.data() + fwd_start);
      double kf, nf;
      detail::momentum_stats(scratch, p, pf, kf, nf);
      xf = sfx / sfn;
    }

    log.t.push_back(t_now);
    log.norm.push_back(std::sqrt(sn * dx));
    log.x_mean.push_back(sx / sn);
    log.p_mean.push_back(p_mean);
    log.energy.push_back(kin + sv / sn);
    log.forward_fraction.push_back(sfn / sn);
    log.x_fwd.push_back(xf);
    log.p_fwd.push_back(pf);
  };

  sample(0.0);
  // Nyquist sanity: the grid must resolve momenta well beyond what the
  // initial energy plus the potential can produce.
  const double p_typ = std::sqrt(2.0 * (std::max(0.0, log.energy[0]) + v_max));
  require(kPi / dx >= 2.0 * p_typ + 4.0, ErrKind::invalid_parameter,
          "grid Nyquist momentum too small for this run");

  const long long n_blocks = steps_total / block;
  for (long long blk = 0; blk < n_blocks; ++blk) {
    for (int i = 0; i < n; ++i) w[i] *= exp_v_half[i];
    for (long long s = 0; s < block; ++s) {
      work.forward();
      for (int k = 0; k < n; ++k) w[k] *= exp_t[k];
      work.backward();
      if (s + 1 < block)
        for (int i = 0; i < n; ++i) w[i] *= exp_v_full[i];
    }
    for (int i = 0; i < n; ++i) w[i] *= exp_v_half[i];
    sample((blk + 1) * block * opts.dt);
  }

  PropagationResult res{Wavefunction{psi0.grid, {w, w + n}}, std::move(log)};
  return res;
}

// ---------------------------------------------------------------------------
// Two-level validation channel. The excitation-number block for n photons is
//   H_n = -1/2 d^2/dx^2 + [ +delta/2   kappa(x) ]
//                         [ kappa(x)  -delta/2 ]
// acting on (ground, excited), kappa(x) = g0 sqrt(n) cos(x) w(x). The ground
// component sits at +delta/2 so that eliminating the far-detuned excited
// level leaves the repulsive dispersive lattice +U n cos^2(x), U = g0^2/delta.
// The potential block is applied as an exact 2x2 rotation each half step.
// ---------------------------------------------------------------------------

struct TwoLevelResult {
  Wavefunction ground;
  Wavefunction excited;
  double max_excited_population = 0.0;  // max over samples of integral |psi_e|^2
  double final_norm = 0.0;
};

inline TwoLevelResult propagate_two_level(const Wavefunction& ground0, int n_photons, double g0,
                                          double delta, double l, double x_s, double t_f,
                                          const PropagateOptions& opts = {},
                                          const Wavefunction* excited0 = nullptr) {
  ground0.grid.validate();
  require(n_photons >= 0, ErrKind::invalid_parameter, "photon number must be nonnegative");
  require(delta != 0.0, ErrKind::invalid_parameter, "two-level channel needs nonzero delta");
  const double steps_f = t_f / opts.dt;
  const long long steps_total = std::llround(steps_f);
  require(std::abs(steps_f - steps_total) < 1e-6, ErrKind::invalid_parameter,
          "t_f must be an integer number of time steps");

  const int n = ground0.grid.n_points;
  const double dx = ground0.grid.spacing();
  const auto p = detail::momentum_grid(ground0.grid);
  const EnvelopePotential env{1.0, l, x_s};  // reuse the envelope shape

  // Exact potential-block rotation over tau: exp(-i tau (a sz + k sx)) with
  // a = delta/2. Cached for the two substep sizes used below.
  const double a = 0.5 * delta;
  std::vector<double> kappa(n);
  for (int i = 0; i < n; ++i) {
    const double x = ground0.grid.point(i);
    kappa[i] = g0 * std::sqrt(static_cast<double>(n_photons)) * std::cos(x) * env.envelope(x);
  }
  struct Rot {
    std::complex<double> gg, ge, eg, ee;
  };
  auto make_rot = [&](double tau) {
    std::vector<Rot> r(n);
    for (int i = 0; i < n; ++i) {
      const double omega = std::sqrt(a * a + kappa[i] * kappa[i]);
      const double c = std::cos(omega * tau);
      const double s = omega > 0.0 ? std::sin(omega * tau) / omega : tau;
      r[i].gg = {c, -s * a};
      r[i].ee = {c, s * a};
      r[i].ge = {0.0, -s * kappa[i]};
      r[i].eg = r[i].ge;
    }
    return r;
  };
  const auto rot_half = make_rot(0.5 * opts.dt);
  const auto rot_full = make_rot(opts.dt);

  const double inv_n = 1.0 / n;
  std::vector<std::complex<double>> exp_t(n);
  for (int k = 0; k < n; ++k) exp_t[k] = std::polar(inv_n, -0.5 * opts.dt * p[k] * p[k]);

  Fft1D fg(n), fe(n);
  std::copy(ground0.values.begin(), ground0.values.end(), fg.data());
  if (excited0) {
    require(excited0->values.size() == static_cast<std::size_t>(n), ErrKind::invalid_parameter,
            "excited component grid mismatch");
    std::copy(excited0->values.begin(), excited0->values.end(), fe.data());
  } else {
    std::fill(fe.data(), fe.data() + n, std::complex<double>(0.0));
  }
  auto* g = fg.data();
  auto* e = fe.data();

  auto apply_rot = [&](const std::vector<Rot>& r) {
    for (int i = 0; i < n; ++i) {
      const auto gi = g[i], ei = e[i];
      g[i] = r[i].gg * gi + r[i].ge * ei;
      e[i] = r[i].eg * gi + r[i].ee * ei;
    }
  };
  auto kinetic = [&] {
    fg.forward();
    fe.forward();
    for (int k = 0; k < n; ++k) {
      g[k] *= exp_t[k];
      e[k] *= exp_t[k];
    }
    fg.backward();
    fe.backward();
  };

  double max_exc = 0.0;
  const long long probe_every = std::clamp<long long>(steps_total / 256, 1, 100000);
  long long done = 0;
  while (done < steps_total) {
    const long long blk = std::min(probe_every, steps_total - done);
    apply_rot(rot_half);
    for (long long s = 0; s < blk; ++s) {
      kinetic();
      if (s + 1 < blk) apply_rot(rot_full);
    }
    apply_rot(rot_half);
    done += blk;
    double pe = 0.0;
    for (int i = 0; i < n; ++i) pe += std::norm(e[i]);
    max_exc = std::max(max_exc, pe * dx);
    double leak = 0.0;
    for (int i = 0; i < opts.boundary_cells; ++i)
      leak += std::norm(g[i]) + std::norm(g[n - 1 - i]);
    require(leak * dx <= opts.boundary_tol, ErrKind::boundary_leak,
            "probability reached the grid boundary; enlarge the grid");
  }

  TwoLevelResult res{Wavefunction{ground0.grid, {g, g + n}},
                     Wavefunction{ground0.grid, {e, e + n}}, max_exc, 0.0};
  res.final_norm = std::sqrt(res.ground.norm_sq() + res.excited.norm_sq());
  return res;
}

// ---------------------------------------------------------------------------
// Forward renormalization: drop everything behind `cut` and renormalize what
// remains (back-scattered atoms are never detected).
// ---------------------------------------------------------------------------

inline Wavefunction forward_renormalize(const Wavefunction& psi, double cut) {
  Wavefunction out = psi;
  double fwd = 0.0;
  for (int i = 0; i < psi.grid.n_points; ++i) {
    if (psi.grid.point(i) < cut)
      out.values[i] = 0.0;
    else
      fwd += std::norm(psi.values[i]);
  }
  fwd *= psi.grid.spacing();
  require(fwd >= 1e-6, ErrKind::no_signal, "no forward probability beyond the cut");
  const double inv = 1.0 / std::sqrt(fwd);
  for (auto& v : out.values) v *= inv;
  return out;
}

inline std::vector<double> forward_renormalize_density(const std::vector<double>& rho,
                                                       const GridSpec& grid, double cut) {
  require(rho.size() == static_cast<std::size_t>(grid.n_points), ErrKind::invalid_parameter,
          "density/grid size mismatch");
  std::vector<double> out(rho.size(), 0.0);
  double fwd = 0.0;
  for (int i = 0; i < grid.n_points; ++i)
    if (grid.point(i) >= cut) fwd += rho[i];
  fwd *= grid.spacing();
  require(fwd >= 1e-6, ErrKind::no_signal, "no forward probability beyond the cut");
  for (int i = 0; i < grid.n_points; ++i)
    if (grid.point(i) >= cut) out[i] = rho[i] / fwd;
  return out;
}

// ---------------------------------------------------------------------------
// Time of flight of the forward-component centroid between the mirrors at
// -L/2 and +L/2; L / tau estimates the in-cavity group velocity.
// ---------------------------------------------------------------------------

struct TimeOfFlight {
  double t_enter;
  double t_exit;
  double tau;
  double v_estimate;
};

inline TimeOfFlight time_of_flight(const TrajectoryLog& log, double l) {
  auto crossing = [&](const std::vector<double>& x, double level) -> double {
    for (std::size_t i = 1; i < log.t.size(); ++i) {
      const double a = x[i - 1], b = x[i];
      if (a < level && b >= level) {
        const double f = (level - a) / (b - a);
        return log.t[i - 1] + f * (log.t[i] - log.t[i - 1]);
      }
    }
    return std::numeric_limits<double>::quiet_NaN();
  };
  // Entry: the packet is still one blob, so the full centroid is unbiased
  // (the forward-window centroid is meaningless while the window is empty).
  // Exit: the reflected packet has left the forward window, whose centroid
  // then tracks the detected component alone.
  const double t_in = crossing(log.x_mean, -0.5 * l);
  const double t_out = crossing(log.x_fwd, 0.5 * l);
  require(std::isfinite(t_in) && std::isfinite(t_out), ErrKind::insufficient_propagation,
          "forward centroid never crossed both mirrors");
  const double tau = t_out - t_in;
  return TimeOfFlight{t_in, t_out, tau, l / tau};
}

}  // namespace qnd
