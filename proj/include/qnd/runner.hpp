#pragma once

#include <chrono>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "qnd/bloch.hpp"
#include "qnd/config.hpp"
#include "qnd/csv.hpp"
#include "qnd/errors.hpp"
#include "qnd/field.hpp"
#include "qnd/measurement.hpp"
#include "qnd/model.hpp"
#include "qnd/propagator.hpp"
#include "qnd/rng.hpp"
#include "qnd/semianalytic.hpp"
#include "qnd/version.hpp"

namespace qnd {

struct RunOutcome {
  std::vector<std::string> outputs;
  std::string manifest;
};

namespace detail {

inline std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline FieldState initial_field(const RunConfig& cfg) {
  double re = cfg.qfunction.alpha_re;
  const double im = cfg.qfunction.alpha_im;
  if (std::isnan(re)) re = std::sqrt(cfg.params.nbar);
  return FieldState::coherent({re, im}, cfg.params.n_max);
}

inline void write_qfunction_csv(const std::string& path, const FieldState& state,
                                const PhaseSpaceGrid& grid, std::vector<std::string>& outputs) {
  const auto q = husimi_q(state, grid);
  CsvWriter csv(path, {"alpha_re", "alpha_im", "q"});
  for (int i = 0; i < grid.n_re; ++i)
    for (int j = 0; j < grid.n_im; ++j)
      csv.row({grid.re(i), grid.im(j), q[static_cast<std::size_t>(i) * grid.n_im + j]});
  csv.close();
  outputs.push_back(path);
}

// ---- bands ----------------------------------------------------------------

inline void run_bands(const RunConfig& cfg, const std::string& dir,
                      std::vector<std::string>& outputs) {
  const BandsOptions& b = cfg.bands;
  BlochSolution sol = solve_bands(b.depth, zone_grid(b.q_points), b.n_bands, b.cutoff);
  std::vector<std::string> header = {"q"};
  for (int band = 1; band <= b.n_bands; ++band) header.push_back("E_" + std::to_string(band));
  const std::string path = join_path(dir, "bands.csv");
  CsvWriter csv(path, header);
  for (std::size_t iq = 0; iq < sol.q_grid.size(); ++iq) {
    std::vector<double> row = {sol.q_grid[iq]};
    for (int band = 1; band <= b.n_bands; ++band)
      row.push_back(sol.energy(band, static_cast<int>(iq)));
    csv.row(row);
  }
  csv.close();
  outputs.push_back(path);
}

// ---- semianalytic density ---------------------------------------------------

inline void run_semianalytic(const RunConfig& cfg, const std::string& dir,
                             std::vector<std::string>& outputs) {
  const SimulationParams& p = cfg.params;
  const FieldState field = FieldState::coherent(std::sqrt(p.nbar), p.n_max);
  const AtomFieldState state = make_atom_field_state(p, field, p.t_f);

  double x_lo = cfg.semianalytic.x_min, x_hi = cfg.semianalytic.x_max;
  if (std::isnan(x_lo) || std::isnan(x_hi)) {
    double cmin = 1e300, cmax = -1e300, smax = 0.0;
    for (const auto& c : state.components) {
      cmin = std::min(cmin, c.center);
      cmax = std::max(cmax, c.center);
      smax = std::max(smax, std::sqrt(c.sigma_sq()));
    }
    if (std::isnan(x_lo)) x_lo = cmin - 8.0 * smax;
    if (std::isnan(x_hi)) x_hi = cmax + 8.0 * smax;
  }
  const int npts = cfg.semianalytic.n_points;
  require(npts >= 2, ErrKind::invalid_config, "semianalytic.n_points too small");
  std::vector<double> x(npts);
  for (int i = 0; i < npts; ++i) x[i] = x_lo + (x_hi - x_lo) * i / (npts - 1);
  const auto rho = atomic_density(state, x);

  const std::string path = join_path(dir, "density.csv");
  CsvWriter csv(path, {"x", "rho_at"});
  for (int i = 0; i < npts; ++i) csv.row({x[i], rho[i]});
  csv.close();
  outputs.push_back(path);
}

// ---- entropy trajectory -----------------------------------------------------

inline void run_entropy(const RunConfig& cfg, const std::string& dir,
                        std::vector<std::string>& outputs) {
  const SimulationParams& p = cfg.params;
  const FieldState field = FieldState::coherent(std::sqrt(p.nbar), p.n_max);
  double t_max = cfg.entropy.t_max;
  if (std::isnan(t_max)) t_max = p.t_f;
  const int nt = cfg.entropy.n_times;
  require(nt >= 2, ErrKind::invalid_config, "entropy.n_times too small");
  std::vector<double> times(nt);
  for (int i = 0; i < nt; ++i) times[i] = t_max * i / (nt - 1);
  const auto samples = entropy_trajectory(p, field, times);

  const std::string path = join_path(dir, "entropy.csv");
  CsvWriter csv(path, {"t", "S_f", "S_max"});
  for (const auto& s : samples) csv.row({s.t, s.entropy, s.entropy_max});
  csv.close();
  outputs.push_back(path);
}

// ---- full propagation -------------------------------------------------------

inline void run_propagate(const RunConfig& cfg, const std::string& dir,
                          std::vector<std::string>& outputs) {
  const SimulationParams& p = cfg.params;
  std::vector<int> n_list = cfg.propagate.n_list;
  if (n_list.empty())
    for (int n = 0; n <= p.n_max; ++n) n_list.push_back(n);

  PropagateOptions opts;
  opts.dt = p.dt;
  opts.sample_every = cfg.propagate.sample_every;
  opts.forward_cut = -0.5 * p.L - 10.0 * p.X_s;
  const Wavefunction psi0 = gaussian_packet(p.grid, p.x0, p.p0, p.dx_packet);

  for (int n : n_list) {
    require(n <= p.n_max, ErrKind::invalid_config, "n_list entry exceeds n_max");
    const EnvelopePotential v = envelope_potential(p.U, n, p.L, p.X_s);
    PropagationResult res = propagate(psi0, v, p.t_f, opts);

    const std::string tpath = join_path(dir, "trajectory_n" + std::to_string(n) + ".csv");
    CsvWriter tcsv(tpath,
                   {"t", "x_mean", "p_mean", "norm", "forward_fraction", "x_fwd", "p_fwd"});
    for (std::size_t i = 0; i < res.log.t.size(); ++i)
      tcsv.row({res.log.t[i], res.log.x_mean[i], res.log.p_mean[i], res.log.norm[i],
                res.log.forward_fraction[i], res.log.x_fwd[i], res.log.p_fwd[i]});
    tcsv.close();
    outputs.push_back(tpath);

    try {
      const Wavefunction fwd = forward_renormalize(res.psi, 0.5 * p.L);
      const std::string dpath = join_path(dir, "forward_density_n" + std::to_string(n) + ".csv");
      CsvWriter dcsv(dpath, {"x", "density"});
      for (int i = 0; i < p.grid.n_points; ++i) {
        const double x = p.grid.point(i);
        if (x >= 0.5 * p.L) dcsv.row({x, std::norm(fwd.values[i])});
      }
      dcsv.close();
      outputs.push_back(dpath);
    } catch (const Error& e) {
      if (e.kind() != ErrKind::no_signal) throw;  // closed channel: no forward density file
    }
  }
}

// ---- measurement cascades ---------------------------------------------------

inline void write_cascade_csv(const std::string& path, const FieldState& prior,
                              const std::vector<CascadeRecord>& records, int n_max,
                              std::vector<std::string>& outputs) {
  std::vector<std::string> header = {"j", "x_r"};
  for (int n = 0; n <= n_max; ++n) header.push_back("p_" + std::to_string(n));
  header.push_back("max_n");
  header.push_back("collapsed");
  CsvWriter csv(path, header);

  auto emit = [&](int j, double x_r, const std::vector<double>& probs, int max_n,
                  bool collapsed) {
    std::vector<std::string> cells = {std::to_string(j), csv_num(x_r)};
    for (double p : probs) cells.push_back(csv_num(p));
    cells.push_back(std::to_string(max_n));
    cells.push_back(collapsed ? "1" : "0");
    csv.raw_row(cells);
  };
  const auto prior_probs = prior.probabilities();
  const int prior_max = static_cast<int>(
      std::max_element(prior_probs.begin(), prior_probs.end()) - prior_probs.begin());
  emit(0, std::numeric_limits<double>::quiet_NaN(), prior_probs, prior_max, false);
  for (const auto& rec : records)
    emit(rec.atom_index, rec.x_r, rec.posterior, rec.max_n, rec.collapsed);
  csv.close();
  outputs.push_back(path);
}

inline void run_measure_single(const RunConfig& cfg, const SimulationParams& params,
                               const std::string& tag, const std::string& dir,
                               std::vector<std::string>& outputs) {
  BuildOptions build;
  build.prop.sample_every = std::max(1.0, params.dt * 100.0);
  const MeasurementComponents mc = build_components(params, build);
  const FieldState prior = FieldState::coherent(std::sqrt(params.nbar), params.n_max);

  const std::string spath = join_path(dir, "summary" + tag + ".csv");
  CsvWriter summary(spath, {"cascade", "atoms", "collapsed", "collapsed_n"});
  for (int k = 0; k < cfg.measure.n_cascades; ++k) {
    Rng rng(derive_stream(params.seed, static_cast<std::uint64_t>(k)));
    CascadeOptions copts;
    copts.max_atoms = cfg.measure.max_atoms;
    copts.collapse_threshold = cfg.measure.collapse_threshold;
    copts.weight_by_transmission = cfg.measure.weight_by_transmission;
    const auto records = run_cascade(mc, prior, rng, copts);

    write_cascade_csv(join_path(dir, "cascade" + tag + "_" + std::to_string(k) + ".csv"), prior,
                      records, params.n_max, outputs);
    const auto& last = records.back();
    summary.raw_row({std::to_string(k), std::to_string(last.atom_index),
                     last.collapsed ? "1" : "0", std::to_string(last.max_n)});

    if (k == 0 && !cfg.measure.q_snapshots.empty()) {
      for (int j : cfg.measure.q_snapshots) {
        const FieldState* state = nullptr;
        FieldState snapshot = prior;
        if (j == 0) {
          state = &prior;
        } else if (j <= static_cast<int>(records.size())) {
          snapshot = FieldState(std::vector<std::complex<double>>(
              records[j - 1].amplitudes.begin(), records[j - 1].amplitudes.end()));
          state = &snapshot;
        } else {
          continue;  // cascade collapsed before this snapshot
        }
        write_qfunction_csv(join_path(dir, "qfunction" + tag + "_j" + std::to_string(j) + ".csv"),
                            *state, cfg.qfunction.grid, outputs);
      }
    }
  }
  summary.close();
  outputs.push_back(spath);
}

inline void run_measure(const RunConfig& cfg, const std::string& dir,
                        std::vector<std::string>& outputs) {
  if (cfg.measure.l_values.empty()) {
    run_measure_single(cfg, cfg.params, "", dir, outputs);
    return;
  }
  for (double l : cfg.measure.l_values) {
    SimulationParams p = cfg.params;
    p.L = l;
    p.x0 = -0.5 * l + cfg.measure.x0_offset;
    for (const auto& [lv, tf] : cfg.measure.t_f_by_l)
      if (lv == l) p.t_f = tf;
    p.grid = auto_grid(p);
    p.finalize();
    const std::string tag = "_L" + std::to_string(static_cast<long long>(std::llround(l)));
    run_measure_single(cfg, p, tag, dir, outputs);
  }
}

// ---- standalone Q function --------------------------------------------------

inline void run_qfunction(const RunConfig& cfg, const std::string& dir,
                          std::vector<std::string>& outputs) {
  write_qfunction_csv(join_path(dir, "qfunction.csv"), initial_field(cfg), cfg.qfunction.grid,
                      outputs);
}

}  // namespace detail

inline RunOutcome run(const RunConfig& cfg, const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  require(!ec, ErrKind::io, "cannot create output directory: " + out_dir);

  RunOutcome outcome;
  if (cfg.command == "bands")
    detail::run_bands(cfg, out_dir, outcome.outputs);
  else if (cfg.command == "semianalytic")
    detail::run_semianalytic(cfg, out_dir, outcome.outputs);
  else if (cfg.command == "entropy")
    detail::run_entropy(cfg, out_dir, outcome.outputs);
  else if (cfg.command == "propagate")
    detail::run_propagate(cfg, out_dir, outcome.outputs);
  else if (cfg.command == "measure")
    detail::run_measure(cfg, out_dir, outcome.outputs);
  else if (cfg.command == "qfunction")
    detail::run_qfunction(cfg, out_dir, outcome.outputs);
  else
    raise(ErrKind::invalid_config, "unknown command '" + cfg.command + "'");

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json manifest = {{"version", kVersion},
                   {"command", cfg.command},
                   {"seed", cfg.params.seed},
                   {"wall_time_s", wall},
                   {"config", cfg.resolved},
                   {"outputs", outcome.outputs}};
  outcome.manifest = detail::join_path(out_dir, cfg.command + "_manifest.json");
  std::ofstream mf(outcome.manifest);
  require(mf.good(), ErrKind::io, "cannot write manifest: " + outcome.manifest);
  mf << manifest.dump(2) << "\n";
  mf.close();
  require(mf.good(), ErrKind::io, "manifest write failure");
  return outcome;
}

}  // namespace qnd
