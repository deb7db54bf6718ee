#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <mutex>
#include <thread>
#include <vector>

#include "qnd/errors.hpp"
#include "qnd/field.hpp"
#include "qnd/model.hpp"
#include "qnd/propagator.hpp"
#include "qnd/rng.hpp"

namespace qnd {

// ---------------------------------------------------------------------------
// Per-photon-number forward components psi'_n(x, t_f), renormalized over the
// detection region x >= L/2 and cached once: the block structure of the
// Hamiltonian means the field state never alters the atomic dynamics for a
// given n, so a whole measurement cascade reuses one propagation sweep.
//
// Photon numbers whose forward transmission is essentially zero (no open band
// at the incident energy, or the open channel is too slow to exit by t_f) are
// stored as zero components: a detected atom rules those n out.
// ---------------------------------------------------------------------------

struct MeasurementComponents {
  GridSpec grid;           // full propagation grid shared by every n
  double cut = 0.0;        // detection region start (L/2)
  std::size_t cut_index = 0;
  double dx = 0.0;
  int n_max = 0;
  std::vector<double> x;                                // detection-region nodes
  std::vector<std::vector<std::complex<double>>> psi;   // [n][node], unit norm or zero
  std::vector<double> transmission;                     // raw forward probability
  std::vector<bool> usable;

  std::size_t region_size() const { return x.size(); }
};

struct BuildOptions {
  PropagateOptions prop;
  double no_signal_tol = 1e-9;
  unsigned n_threads = 0;  // 0 = hardware concurrency
};

inline MeasurementComponents build_components(const SimulationParams& params,
                                              const BuildOptions& options = {}) {
  MeasurementComponents mc;
  mc.grid = params.grid;
  mc.cut = 0.5 * params.L;
  mc.n_max = params.n_max;
  mc.dx = params.grid.spacing();
  std::size_t ci = 0;
  while (ci < static_cast<std::size_t>(params.grid.n_points) &&
         params.grid.point(static_cast<int>(ci)) < mc.cut)
    ++ci;
  require(ci + 16 < static_cast<std::size_t>(params.grid.n_points), ErrKind::invalid_parameter,
          "grid has no room beyond the detection cut");
  mc.cut_index = ci;
  const std::size_t region = params.grid.n_points - ci;
  mc.x.resize(region);
  for (std::size_t j = 0; j < region; ++j)
    mc.x[j] = params.grid.point(static_cast<int>(ci + j));
  mc.psi.assign(params.n_max + 1, {});
  mc.transmission.assign(params.n_max + 1, 0.0);
  mc.usable.assign(params.n_max + 1, false);

  PropagateOptions prop = options.prop;
  prop.dt = params.dt;
  prop.forward_cut = -0.5 * params.L - 10.0 * params.X_s;

  const Wavefunction psi0 =
      gaussian_packet(params.grid, params.x0, params.p0, params.dx_packet);

  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&](int n) {
    try {
      const EnvelopePotential v = envelope_potential(params.U, n, params.L, params.X_s);
      PropagationResult res = propagate(psi0, v, params.t_f, prop);
      double fwd = 0.0;
      for (std::size_t j = 0; j < region; ++j) fwd += std::norm(res.psi.values[ci + j]);
      fwd *= mc.dx;
      mc.transmission[n] = fwd;
      if (fwd >= options.no_signal_tol) {
        std::vector<std::complex<double>> comp(region);
        const double inv = 1.0 / std::sqrt(fwd);
        for (std::size_t j = 0; j < region; ++j) comp[j] = res.psi.values[ci + j] * inv;
        mc.psi[n] = std::move(comp);
        mc.usable[n] = true;
      } else {
        mc.psi[n].assign(region, std::complex<double>(0.0));
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };

  unsigned hw = options.n_threads ? options.n_threads : std::thread::hardware_concurrency();
  hw = std::clamp(hw, 1u, static_cast<unsigned>(params.n_max + 1));
  if (hw <= 1) {
    for (int n = 0; n <= params.n_max; ++n) worker(n);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (unsigned t = 0; t < hw; ++t)
      pool.emplace_back([&] {
        for (int n = next.fetch_add(1); n <= params.n_max; n = next.fetch_add(1)) worker(n);
      });
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return mc;
}

// ---------------------------------------------------------------------------
// Detection density over x >= L/2 for the current field state, normalized on
// the region with the same grid quadrature used to normalize the components
// (this is what makes the filter update an exact martingale on the grid).
// With weight_by_transmission the per-n forward probabilities multiply the
// weights instead of being discarded.
// ---------------------------------------------------------------------------

inline std::vector<double> detection_density(const MeasurementComponents& mc,
                                             const FieldState& field,
                                             bool weight_by_transmission = false) {
  require(field.cutoff() == mc.n_max, ErrKind::invalid_parameter,
          "field cutoff does not match the component table");
  const std::size_t region = mc.region_size();
  std::vector<double> rho(region, 0.0);
  for (int n = 0; n <= mc.n_max; ++n) {
    double w = std::norm(field.amplitude(n));
    if (weight_by_transmission) w *= mc.transmission[n];
    if (w == 0.0 || !mc.usable[n]) continue;
    const auto& comp = mc.psi[n];
    for (std::size_t j = 0; j < region; ++j) rho[j] += w * std::norm(comp[j]);
  }
  double total = 0.0;
  for (double r : rho) total += r;
  total *= mc.dx;
  require(total > 0.0, ErrKind::no_signal,
          "field state has no weight on any transmitting photon number");
  for (double& r : rho) r /= total;
  return rho;
}

// Inverse-CDF draw from a grid density: node j owns the cell
// [x_j, x_j + dx) with mass rho_j dx, and the position is linearly
// interpolated inside the chosen cell. One uniform variate per draw.
inline double sample_position(const std::vector<double>& density, const std::vector<double>& x,
                              double dx, Rng& rng) {
  require(density.size() == x.size() && !density.empty(), ErrKind::invalid_parameter,
          "density/grid size mismatch");
  double total = 0.0;
  for (double d : density) {
    require(d >= 0.0 && std::isfinite(d), ErrKind::invalid_parameter,
            "density must be finite and nonnegative");
    total += d;
  }
  require(total > 0.0, ErrKind::zero_likelihood, "degenerate (all-zero) density");
  const double u = rng.uniform() * total;
  double cum = 0.0;
  for (std::size_t j = 0; j < density.size(); ++j) {
    const double next = cum + density[j];
    if (u < next || j + 1 == density.size()) {
      const double frac = density[j] > 0.0 ? (u - cum) / density[j] : 0.0;
      return x[j] + std::clamp(frac, 0.0, 1.0) * dx;
    }
    cum = next;
  }
  return x.back();  // unreachable
}

// ---------------------------------------------------------------------------
// Photon-filter update after a detection at x_r: the projective measurement
// leaves the field pure with amplitudes c_n <- psi'_n(x_r) c_n / N.
// Component values are interpolated linearly between nodes.
// ---------------------------------------------------------------------------

inline FieldState filter_update(const FieldState& field, const MeasurementComponents& mc,
                                double x_r, bool weight_by_transmission = false) {
  require(!mc.x.empty() && x_r >= mc.x.front() && x_r <= mc.x.back() + mc.dx,
          ErrKind::invalid_parameter, "x_r outside the detection region");
  const std::size_t region = mc.region_size();
  const double fpos = std::clamp((x_r - mc.x.front()) / mc.dx, 0.0, double(region - 1));
  const std::size_t j0 = std::min(static_cast<std::size_t>(fpos), region - 2);
  const double frac = fpos - j0;

  std::vector<std::complex<double>> post(mc.n_max + 1);
  double norm_sq = 0.0;
  for (int n = 0; n <= mc.n_max; ++n) {
    std::complex<double> v = 0.0;
    if (mc.usable[n]) {
      const auto& comp = mc.psi[n];
      v = comp[j0] + frac * (comp[j0 + 1] - comp[j0]);
      if (weight_by_transmission) v *= std::sqrt(mc.transmission[n]);
    }
    post[n] = v * field.amplitude(n);
    norm_sq += std::norm(post[n]);
  }
  require(norm_sq > 0.0, ErrKind::zero_likelihood,
          "all photon components vanish at the sampled position");
  return FieldState(std::move(post));
}

// ---------------------------------------------------------------------------
// Measurement cascade: sample a detection from the current density, filter,
// repeat until the photon distribution has collapsed (max probability above
// the threshold) or max_atoms is reached.
// ---------------------------------------------------------------------------

struct CascadeRecord {
  int atom_index = 0;  // 1-based
  double x_r = 0.0;
  std::vector<double> posterior;                  // |c_n|^2
  std::vector<std::complex<double>> amplitudes;   // pure-state amplitudes
  int max_n = 0;
  bool collapsed = false;
};

struct CascadeOptions {
  int max_atoms = 50;
  double collapse_threshold = 0.99;
  bool weight_by_transmission = false;
};

inline std::vector<CascadeRecord> run_cascade(const MeasurementComponents& mc,
                                              const FieldState& field0, Rng& rng,
                                              const CascadeOptions& options = {}) {
  require(options.max_atoms >= 1, ErrKind::invalid_parameter, "max_atoms must be positive");
  require(options.collapse_threshold > 0.0 && options.collapse_threshold <= 1.0,
          ErrKind::invalid_parameter, "collapse threshold must be in (0, 1]");
  std::vector<CascadeRecord> records;
  FieldState field = field0;
  for (int j = 1; j <= options.max_atoms; ++j) {
    const auto rho = detection_density(mc, field, options.weight_by_transmission);
    const double x_r = sample_position(rho, mc.x, mc.dx, rng);
    field = filter_update(field, mc, x_r, options.weight_by_transmission);

    CascadeRecord rec;
    rec.atom_index = j;
    rec.x_r = x_r;
    rec.posterior = field.probabilities();
    rec.amplitudes.assign(field.amplitudes().begin(), field.amplitudes().end());
    rec.max_n = static_cast<int>(std::max_element(rec.posterior.begin(), rec.posterior.end()) -
                                 rec.posterior.begin());
    rec.collapsed = rec.posterior[rec.max_n] > options.collapse_threshold;
    records.push_back(std::move(rec));
    if (records.back().collapsed) break;
  }
  return records;
}

}  // namespace qnd
