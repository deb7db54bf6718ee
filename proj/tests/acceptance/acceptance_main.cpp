// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failed criteria. Heavy artifacts (the per-photon-number component sweeps)
// are built once per cavity length and shared across criteria. Criteria can
// be selected by listing their numbers as arguments, e.g. `qnd_acceptance 1 2 5`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "qnd/bloch.hpp"
#include "qnd/config.hpp"
#include "qnd/field.hpp"
#include "qnd/measurement.hpp"
#include "qnd/model.hpp"
#include "qnd/propagator.hpp"
#include "qnd/rng.hpp"
#include "qnd/semianalytic.hpp"
#include "support/oracles.hpp"

using namespace qnd;

namespace {

struct Reporter {
  int failures = 0;

  void report(int id, const std::string& title, bool ok, const std::string& detail) {
    std::printf("criterion %2d %s: %s — %s\n", id, ok ? "PASS" : "FAIL", title.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// Cavity-run parameter sets behind the measurement criteria: the long-cavity
// propagation scenario with x0 = -L/2 - 70 and a final time long enough for
// every open channel to clear the detector side.
SimulationParams cavity_params(double l) {
  SimulationParams p;
  p.U = 0.7;
  p.X_s = 0.2;
  p.p0 = 3.75;
  p.dx_packet = 15.0;
  p.nbar = 4.0;
  p.dt = 0.01;
  p.L = l;
  p.x0 = -0.5 * l - 70.0;
  p.t_f = l == 1400.0 ? 660.0 : (l == 600.0 ? 340.0 : 200.0);
  p.seed = 1;
  p.grid = auto_grid(p);
  p.finalize();
  return p;
}

struct ComponentCache {
  std::map<double, MeasurementComponents> by_length;

  const MeasurementComponents& get(double l) {
    auto it = by_length.find(l);
    if (it != by_length.end()) return it->second;
    const auto t0 = now_s();
    std::fprintf(stderr, "[components] building L = %g sweep (n = 0..20)...\n", l);
    SimulationParams p = cavity_params(l);
    MeasurementComponents mc = build_components(p);
    std::fprintf(stderr, "[components] L = %g done in %.1f s\n", l, now_s() - t0);
    return by_length.emplace(l, std::move(mc)).first->second;
  }
};

ComponentCache g_cache;

// --------------------------------------------------------------------------

void criterion_1(Reporter& rep) {
  bool ok = true;
  std::string detail;

  const auto free_sol = solve_bands(0.0, zone_grid(512), 4);
  double worst_free = 0.0;
  for (std::size_t iq = 0; iq < free_sol.q_grid.size(); ++iq) {
    const auto free = oracle::folded_free_energies(free_sol.q_grid[iq], 4);
    for (int b = 1; b <= 4; ++b)
      worst_free =
          std::max(worst_free, std::abs(free_sol.energy(b, static_cast<int>(iq)) - free[b - 1]));
  }
  ok &= worst_free < 1e-10;

  const auto sol = solve_bands(0.5, zone_grid(512), 3, 32);
  double worst_dense = 0.0;
  for (std::size_t iq = 0; iq < sol.q_grid.size(); ++iq) {
    const auto dense = oracle::dense_band_energies(0.5, sol.q_grid[iq], 64, 3);
    for (int b = 1; b <= 3; ++b)
      worst_dense =
          std::max(worst_dense, std::abs(sol.energy(b, static_cast<int>(iq)) - dense[b - 1]));
  }
  ok &= worst_dense < 1e-9;

  rep.report(1, "band solver exactness", ok,
             fmt("free-dispersion max err %.2e (tol 1e-10), dense-oracle max err %.2e (tol 1e-9)",
                 worst_free, worst_dense));
}

void criterion_2(Reporter& rep) {
  Rng rng(20240601);
  double worst_v = 0.0, worst_m = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double depth = (i % 2 == 0) ? 0.5 : 2.8;
    const int band = 1 + static_cast<int>(rng.uniform() * 4.0);
    const double q = -1.0 + 2.0 * rng.uniform();
    const auto sol = solve_bands(depth, {q}, band + 3);
    const auto bp = band_point(sol, band, q);
    const auto fd = oracle::fd_band_derivatives(depth, band, q);
    // relative error with a 1e-3 scale floor (v_g vanishes at band extrema)
    worst_v = std::max(worst_v, std::abs(bp.group_velocity - fd.vg) /
                                    std::max(std::abs(fd.vg), 1e-3));
    worst_m = std::max(worst_m, std::abs(bp.inv_effective_mass - fd.inv_mass) /
                                    std::max(std::abs(fd.inv_mass), 1e-3));
  }
  const bool ok = worst_v < 1e-6 && worst_m < 1e-6;
  rep.report(2, "derivative consistency", ok,
             fmt("100 random (band, q) points, Un in {0.5, 2.8}: worst rel err v_g %.2e, "
                 "1/m* %.2e (tol 1e-6)",
                 worst_v, worst_m));
}

void criterion_3(Reporter& rep) {
  // free-particle run at full production length
  GridSpec grid{-200.0, 2800.0, 65536};
  const double x0 = 0.0, p0 = 3.75, sigma = 15.0, t_f = 660.0;
  const auto psi0 = gaussian_packet(grid, x0, p0, sigma);
  PropagateOptions opts;
  opts.sample_every = 10.0;
  const auto res = propagate(psi0, [](double) { return 0.0; }, t_f, opts);

  double err2 = 0.0;
  for (int i = 0; i < grid.n_points; ++i)
    err2 += std::norm(res.psi.values[i] -
                      oracle::free_gaussian(grid.point(i), t_f, x0, p0, sigma));
  const double l2 = std::sqrt(err2 * grid.spacing());

  double drift = 0.0;
  for (double nrm : res.log.norm) drift = std::max(drift, std::abs(nrm - 1.0));

  // second-order self-convergence on a short lattice run
  GridSpec cgrid{-150.0, 150.0, 4096};
  const auto cpsi = gaussian_packet(cgrid, -60.0, 2.58, 5.0);
  const auto v = envelope_potential(0.7, 4, 80.0, 0.2);
  auto run_dt = [&](double dt) {
    PropagateOptions o;
    o.dt = dt;
    o.sample_every = 10.0;
    return propagate(cpsi, v, 10.0, o).psi;
  };
  const auto ref = run_dt(0.00125);
  auto l2err = [&](const Wavefunction& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) s += std::norm(a.values[i] - ref.values[i]);
    return std::sqrt(s * cgrid.spacing());
  };
  const double e1 = l2err(run_dt(0.02));
  const double e2 = l2err(run_dt(0.01));
  const double order_ratio = e1 / e2;

  const bool ok = l2 < 1e-8 && drift < 1e-10 && order_ratio > 3.0 && order_ratio < 5.0;
  rep.report(3, "propagator correctness", ok,
             fmt("free-run L2 vs closed form %.2e (tol 1e-8), norm drift %.2e (tol 1e-10), "
                 "dt-halving error ratio %.2f (expect ~4)",
                 l2, drift, order_ratio));
}

void criterion_4(Reporter& rep) {
  // packet initialized deep inside a long cavity, single photon
  GridSpec grid{-500.0, 300.0, 16384};
  const double p0 = 2.58, dp = p0 / 50.0;
  const auto psi0 = gaussian_packet(grid, -300.0, p0, 0.5 / dp);
  PropagateOptions opts;
  opts.sample_every = 1.0;
  const auto res = propagate(psi0, envelope_potential(0.7, 1, 1600.0, 0.2), 150.0, opts);

  // least-squares slope of <x>(t) over t in [50, 150]
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = 0; i < res.log.t.size(); ++i) {
    const double t = res.log.t[i];
    if (t < 50.0) continue;
    sx += t;
    sy += res.log.x_mean[i];
    sxx += t * t;
    sxy += t * res.log.x_mean[i];
    ++m;
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);

  const auto sol = solve_bands(0.7, {0.58}, 5);
  const double vg = band_point(sol, 3, 0.58).group_velocity;
  const double rel = std::abs(slope - vg) / vg;
  rep.report(4, "semianalytic vs numeric transport", rel < 0.02,
             fmt("centroid slope %.5f vs band v_g %.5f: rel dev %.3f%% (tol 2%%)", slope, vg,
                 100.0 * rel));
}

void criterion_5(Reporter& rep) {
  const auto cfg = parse_config(preset("fig2"));
  const auto field = FieldState::coherent(std::sqrt(cfg.params.nbar), cfg.params.n_max);
  const auto state = make_atom_field_state(cfg.params, field, 400.0);

  bool ordered = true;
  for (int n = 0; n < 9; ++n)
    ordered &= state.components[n].center > state.components[n + 1].center;

  double visible = 0.0;
  for (int n = 0; n <= 9; ++n) visible += std::norm(state.amplitudes[n]);

  // density sanity on a wide grid
  std::vector<double> x(24001);
  for (int i = 0; i < 24001; ++i) x[i] = 500.0 + 0.03 * i;
  const auto rho = atomic_density(state, x);
  double mass = 0.0;
  for (double r : rho) mass += r * 0.03;
  int maxima = 0;
  for (std::size_t i = 1; i + 1 < rho.size(); ++i)
    if (rho[i] > rho[i - 1] && rho[i] > rho[i + 1] && rho[i] > 1e-3 * rho[x.size() / 2])
      ++maxima;

  const bool ok = ordered && visible > 0.99 && std::abs(mass - 1.0) < 1e-6;
  rep.report(5, "ideal-model density snapshot", ok,
             fmt("peak centers strictly decreasing n=0..9: %s; weight of first ten states "
                 "%.4f (>0.99); density mass %.6f; note: summed density shows %d separated "
                 "maxima at t=400 (components overlap; see README)",
                 ordered ? "yes" : "NO", visible, mass, maxima));
}

void criterion_6(Reporter& rep) {
  const auto cfg = parse_config(preset("fig2"));
  const auto field = FieldState::coherent(std::sqrt(cfg.params.nbar), cfg.params.n_max);
  std::vector<double> times;
  for (double t = 0.0; t <= 400.0; t += 2.0) times.push_back(t);
  const auto traj = entropy_trajectory(cfg.params, field, times);
  const double s_max = traj.front().entropy_max;

  const bool start_zero = traj.front().entropy < 1e-8;
  bool bounded = true;
  for (const auto& s : traj) bounded &= s.entropy <= s_max + 1e-8;
  const double ratio = traj.back().entropy / s_max;
  const bool reaches = ratio >= 0.95;

  // locate when the 0.95 level is actually reached (diagnostic)
  double t95 = -1.0;
  for (double t = 400.0; t <= 2000.0; t += 25.0) {
    const auto s = entropy_trajectory(cfg.params, field, {t});
    if (s[0].entropy >= 0.95 * s_max) {
      t95 = t;
      break;
    }
  }

  rep.report(6, "entropy trajectory", start_zero && bounded && reaches,
             fmt("S_f(0)=%.1e (<1e-8 %s), bounded by S_max %s, S_f(400)/S_max = %.4f "
                 "(criterion needs >= 0.95; this model first reaches 0.95 near t = %.0f; "
                 "see decisions ledger)",
                 traj.front().entropy, start_zero ? "ok" : "NO", bounded ? "ok" : "NO", ratio,
                 t95));
}

void criterion_7(Reporter& rep) {
  const SimulationParams base = cavity_params(600.0);
  PropagateOptions opts;
  opts.dt = base.dt;
  opts.sample_every = 1.0;
  opts.forward_cut = -0.5 * base.L - 10.0 * base.X_s;
  const auto psi0 = gaussian_packet(base.grid, base.x0, base.p0, base.dx_packet);

  bool restored = true, ordered = true;
  double prev_min = 1e300;
  std::string per_n;
  for (int n = 0; n <= 4; ++n) {
    const auto res =
        propagate(psi0, envelope_potential(base.U, n, base.L, base.X_s), base.t_f, opts);
    const double p_final = res.log.p_fwd.back();
    restored &= std::abs(p_final - base.p0) / base.p0 < 0.01;

    // in-cavity minimum of the forward momentum, sampled deep inside
    double p_min = 1e300;
    for (std::size_t i = 0; i < res.log.t.size(); ++i) {
      const double xf = res.log.x_fwd[i];
      if (xf > -0.5 * base.L + 30.0 && xf < 0.5 * base.L - 30.0)
        p_min = std::min(p_min, res.log.p_fwd[i]);
    }
    ordered &= p_min < prev_min;
    prev_min = p_min;
    per_n += fmt("n%d:%.3f/%.4f ", n, p_min, p_final);
  }
  rep.report(7, "momentum dip and restoration", restored && ordered,
             fmt("per-n in-cavity min / final forward <p> (p0 = 3.75): %s; restoration within "
                 "1%%: %s; minima strictly decreasing: %s",
                 per_n.c_str(), restored ? "yes" : "NO", ordered ? "yes" : "NO"));
}

void criterion_8(Reporter& rep) {
  const double u = 0.7;
  GridSpec grid{-220.0, 160.0, 8192};
  const double x0 = -65.0, p0 = 2.58, sigma = 6.0, t_f = 50.0;
  const auto psi0 = gaussian_packet(grid, x0, p0, sigma);

  PropagateOptions dopts;
  dopts.dt = 0.001;
  dopts.sample_every = t_f;
  const auto disp = propagate(psi0, envelope_potential(u, 1, 80.0, 0.2), t_f, dopts);
  const auto ref_density = disp.psi.density();

  double err20 = -1.0, exc20 = -1.0, bound20 = 0.0;
  bool monotone = true, exc_ok = true;
  double prev = 1e300;
  std::string ladder;
  for (double ratio : {5.0, 10.0, 20.0, 40.0}) {
    const double delta = u * ratio * ratio;
    const double g0 = std::sqrt(u * delta);
    PropagateOptions topts;
    topts.dt = std::min(5e-4, 0.05 / delta);
    const long long steps = std::llround(t_f / topts.dt);
    topts.dt = t_f / static_cast<double>(steps);  // keep t_f an exact multiple
    const auto two = propagate_two_level(psi0, 1, g0, delta, 80.0, 0.2, t_f, topts);
    Wavefunction ground = two.ground;
    ground.normalize();
    double s = 0.0;
    for (std::size_t i = 0; i < ground.values.size(); ++i) {
      const double d = std::norm(ground.values[i]) - ref_density[i];
      s += d * d;
    }
    const double l2 = std::sqrt(s * grid.spacing());
    const double bound = 4.0 * (g0 / delta) * (g0 / delta);
    exc_ok &= two.max_excited_population <= bound;
    monotone &= l2 < prev;
    prev = l2;
    ladder += fmt("r%.0f:%.2e ", ratio, l2);
    if (ratio == 20.0) {
      err20 = l2;
      exc20 = two.max_excited_population;
      bound20 = bound;
    }
  }
  const bool ok = err20 < 1e-2 && exc_ok && monotone;
  rep.report(8, "adiabatic-elimination validation", ok,
             fmt("L2(two-level, dispersive) at ratio 20: %.2e (tol 1e-2); excited pop %.2e <= "
                 "bound %.2e; ladder %s monotone: %s",
                 err20, exc20, bound20, ladder.c_str(), monotone ? "yes" : "NO"));
}

void criterion_9(Reporter& rep) {
  const auto& mc = g_cache.get(1400.0);
  Rng rng(99);
  double worst = 0.0;
  for (int rep_i = 0; rep_i < 3; ++rep_i) {
    FieldState prior = [&] {
      if (rep_i == 0) return FieldState::coherent(2.0, mc.n_max);
      std::vector<std::complex<double>> c(mc.n_max + 1);
      for (auto& a : c) a = std::complex<double>(0.05 + rng.uniform(), rng.uniform() - 0.5);
      return FieldState(std::move(c));
    }();
    const auto rho = detection_density(mc, prior);
    std::vector<double> expected(mc.n_max + 1, 0.0);
    for (std::size_t j = 0; j < rho.size(); ++j) {
      if (rho[j] == 0.0) continue;
      const auto post = filter_update(prior, mc, mc.x[j]);
      const double w = rho[j] * mc.dx;
      for (int n = 0; n <= mc.n_max; ++n) expected[n] += w * std::norm(post.amplitude(n));
    }
    for (int n = 0; n <= mc.n_max; ++n)
      worst = std::max(worst, std::abs(expected[n] - std::norm(prior.amplitude(n))));
  }
  rep.report(9, "filter martingale", worst < 1e-10,
             fmt("max |E[posterior] - prior| over 3 priors x 21 n: %.2e (tol 1e-10)", worst));
}

void criterion_10(Reporter& rep) {
  const int n_cascades = 200;
  std::map<double, double> medians;
  bool all_collapse = true;
  std::vector<double> pooled_counts;
  const FieldState prior = FieldState::coherent(2.0, 20);
  pooled_counts.assign(21, 0.0);

  for (double l : {1400.0, 600.0, 200.0}) {
    const auto& mc = g_cache.get(l);
    std::vector<int> atoms;
    for (int k = 0; k < n_cascades; ++k) {
      Rng rng(derive_stream(1, static_cast<std::uint64_t>(k)));
      const auto records = run_cascade(mc, prior, rng);
      const auto& last = records.back();
      all_collapse &= last.collapsed;
      atoms.push_back(last.atom_index);
      pooled_counts[last.max_n] += 1.0;
    }
    std::sort(atoms.begin(), atoms.end());
    medians[l] = 0.5 * (atoms[n_cascades / 2 - 1] + atoms[n_cascades / 2]);
  }

  const bool median_trend = medians[1400.0] <= medians[600.0] && medians[600.0] <= medians[200.0];
  const bool long_cavity_fast = medians[1400.0] <= 5.0;

  std::vector<double> expected(21);
  const auto p = prior.probabilities();
  for (int n = 0; n <= 20; ++n) expected[n] = p[n] * 3.0 * n_cascades;
  const double pval = oracle::chi_square_pvalue(pooled_counts, expected);

  const bool ok = all_collapse && median_trend && long_cavity_fast && pval > 0.01;
  rep.report(10, "cascade collapse statistics", ok,
             fmt("all 600 cascades collapsed <= 50 atoms: %s; median atoms L1400/600/200 = "
                 "%.1f/%.1f/%.1f (non-increasing in L: %s, L1400 <= 5: %s); collapsed-n vs "
                 "Poisson(4): chi-square p = %.3f (> 0.01)",
                 all_collapse ? "yes" : "NO", medians[1400.0], medians[600.0], medians[200.0],
                 median_trend ? "yes" : "NO", long_cavity_fast ? "yes" : "NO", pval));
}

void criterion_11(Reporter& rep) {
  const auto& mc = g_cache.get(600.0);
  const FieldState prior = FieldState::coherent(2.0, 20);
  PhaseSpaceGrid grid;  // [-4, 4]^2, 201 x 201
  const double cell = std::hypot((grid.re_max - grid.re_min) / (grid.n_re - 1),
                                 (grid.im_max - grid.im_min) / (grid.n_im - 1));

  // initial state: Gaussian centered at (2, 0)
  const auto q0 = husimi_q(prior, grid);
  std::size_t imax = 0;
  for (std::size_t k = 0; k < q0.size(); ++k)
    if (q0[k] > q0[imax]) imax = k;
  const double re0 = grid.re(static_cast<int>(imax) / grid.n_im);
  const double im0 = grid.im(static_cast<int>(imax) % grid.n_im);
  const bool initial_ok = std::hypot(re0 - 2.0, im0 - 0.0) <= cell;

  // collapse a cascade onto a nonzero Fock state, then check the ring radius
  int collapsed_n = -1;
  FieldState post = prior;
  for (std::uint64_t k = 0; k < 50 && collapsed_n < 0; ++k) {
    Rng rng(derive_stream(7, k));
    const auto records = run_cascade(mc, prior, rng);
    if (records.back().collapsed && records.back().max_n >= 1) {
      collapsed_n = records.back().max_n;
      post = FieldState(std::vector<std::complex<double>>(records.back().amplitudes.begin(),
                                                          records.back().amplitudes.end()));
    }
  }
  bool ring_ok = false;
  double r_peak = -1.0;
  if (collapsed_n >= 1) {
    const auto q = husimi_q(post, grid);
    imax = 0;
    for (std::size_t k = 0; k < q.size(); ++k)
      if (q[k] > q[imax]) imax = k;
    r_peak = std::hypot(grid.re(static_cast<int>(imax) / grid.n_im),
                        grid.im(static_cast<int>(imax) % grid.n_im));
    ring_ok = std::abs(r_peak - std::sqrt(static_cast<double>(collapsed_n))) <= cell;
  }
  rep.report(11, "phase-space signature", initial_ok && ring_ok,
             fmt("initial Q max at (%.2f, %.2f) (expect (2,0) within one cell %.3f); collapsed "
                 "onto n = %d with Q-ring radius %.3f vs sqrt(n) = %.3f",
                 re0, im0, cell, collapsed_n, r_peak,
                 collapsed_n >= 1 ? std::sqrt(static_cast<double>(collapsed_n)) : -1.0));
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  auto want = [&](int id) { return selected.empty() || selected.count(id) != 0; };

  Reporter rep;
  try {
    if (want(1)) criterion_1(rep);
    if (want(2)) criterion_2(rep);
    if (want(3)) criterion_3(rep);
    if (want(4)) criterion_4(rep);
    if (want(5)) criterion_5(rep);
    if (want(6)) criterion_6(rep);
    if (want(7)) criterion_7(rep);
    if (want(8)) criterion_8(rep);
    if (want(9)) criterion_9(rep);
    if (want(10)) criterion_10(rep);
    if (want(11)) criterion_11(rep);
  } catch (const std::exception& e) {
    std::printf("acceptance run aborted: %s\n", e.what());
    return 99;
  }
  std::printf("%d criterion(s) failed\n", rep.failures);
  return rep.failures;
}
