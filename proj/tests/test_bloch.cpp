#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "qnd/bloch.hpp"
#include "qnd/model.hpp"
#include "qnd/rng.hpp"
#include "qnd/semianalytic.hpp"
#include "support/oracles.hpp"

using namespace qnd;

TEST_CASE("free lattice reproduces the folded dispersion") {
  const auto sol = solve_bands(0.0, zone_grid(128), 4);
  CHECK(band_point(sol, 1, 0.0).energy == Catch::Approx(0.0).margin(1e-12));
  CHECK(band_point(sol, 1, 0.5).energy == Catch::Approx(0.125).margin(1e-12));
  double worst = 0.0;
  for (std::size_t iq = 0; iq < sol.q_grid.size(); ++iq) {
    const auto free = oracle::folded_free_energies(sol.q_grid[iq], 4);
    for (int b = 1; b <= 4; ++b)
      worst = std::max(worst, std::abs(sol.energy(b, static_cast<int>(iq)) - free[b - 1]));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("eigenvalues match the dense oracle at double cutoff") {
  for (double depth : {0.5, 2.8}) {
    const auto sol = solve_bands(depth, zone_grid(64), 3, 32);
    double worst = 0.0;
    for (std::size_t iq = 0; iq < sol.q_grid.size(); ++iq) {
      const auto dense = oracle::dense_band_energies(depth, sol.q_grid[iq], 64, 3);
      for (int b = 1; b <= 3; ++b)
        worst = std::max(worst, std::abs(sol.energy(b, static_cast<int>(iq)) - dense[b - 1]));
    }
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("parity symmetry of the spectrum") {
  const auto sol = solve_bands(0.5, zone_grid(64), 3);
  for (double q : {0.1, 0.37, 0.8}) {
    for (int b = 1; b <= 3; ++b) {
      const double ep = band_point(sol, b, q).energy;
      const double em = band_point(sol, b, -q).energy;
      CHECK(std::abs(ep - em) < 1e-10);
    }
  }
}

TEST_CASE("eigenvectors are orthonormal per quasi-momentum") {
  const auto sol = solve_bands(2.8, zone_grid(16), 4);
  for (int iq = 0; iq < 16; ++iq) {
    for (int a = 1; a <= 4; ++a) {
      for (int b = a; b <= 4; ++b) {
        const auto va = sol.eigenvector(a, iq);
        const auto vb = sol.eigenvector(b, iq);
        double dot = 0.0;
        for (std::size_t k = 0; k < va.size(); ++k) dot += va[k] * vb[k];
        CHECK(std::abs(dot - (a == b ? 1.0 : 0.0)) < 1e-10);
      }
    }
  }
}

TEST_CASE("band energies increase with the band index and gaps grow with depth") {
  double prev_gap = 0.0;
  for (double depth : {0.5, 1.0, 2.0, 4.0}) {
    const auto sol = solve_bands(depth, {-1.0, 0.0}, 3);
    CHECK(sol.energy(1, 0) < sol.energy(2, 0));
    CHECK(sol.energy(2, 0) < sol.energy(3, 0));
    const double gap = sol.energy(2, 0) - sol.energy(1, 0);  // at q = -1
    CHECK(gap > prev_gap);
    prev_gap = gap;
  }
}

TEST_CASE("band point derivatives: free particle and symmetry point") {
  const auto free_sol = solve_bands(0.0, zone_grid(32), 4);
  for (double p0 : {0.5, 2.58, 3.75}) {
    const auto f = fold_momentum(p0);
    const auto bp = band_point(free_sol, f.band, f.q);
    CHECK(bp.group_velocity == Catch::Approx(p0).margin(1e-10));
    CHECK(bp.inv_effective_mass == Catch::Approx(1.0).margin(1e-8));
  }
  const auto sol = solve_bands(2.8, zone_grid(32), 3);
  CHECK(std::abs(band_point(sol, 1, 0.0).group_velocity) < 1e-10);
  CHECK(std::abs(band_point(sol, 2, 0.0).group_velocity) < 1e-10);
}

TEST_CASE("band point matches refined finite differences") {
  Rng rng(11);
  for (double depth : {0.5, 2.8}) {
    const auto sol = solve_bands(depth, zone_grid(32), 4);
    for (int i = 0; i < 12; ++i) {
      const int band = 1 + static_cast<int>(rng.uniform() * 4.0);
      const double q = -0.95 + 1.9 * rng.uniform();
      const auto bp = band_point(sol, band, q);
      const auto fd = oracle::fd_band_derivatives(depth, band, q);
      CHECK(std::abs(bp.group_velocity - fd.vg) <= 1e-6 * std::max(1.0, std::abs(fd.vg)));
      CHECK(std::abs(bp.inv_effective_mass - fd.inv_mass) <=
            1e-6 * std::max(1.0, std::abs(fd.inv_mass)));
      // the oracle itself must resolve the comparison
      CHECK(fd.vg_err < 1e-7);
      CHECK(fd.inv_mass_err < 1e-6);
    }
  }
}

TEST_CASE("frozen anchor: third band of the ideal-model parameter set") {
  const auto sol = solve_bands(0.7, {0.58}, 3);
  const auto bp = band_point(sol, 3, 0.58);
  CHECK(bp.energy == Catch::Approx(3.683634).margin(2e-6));
  CHECK(bp.group_velocity == Catch::Approx(2.574983).margin(2e-6));
  CHECK(bp.inv_effective_mass == Catch::Approx(1.007495).margin(2e-6));
}

TEST_CASE("group velocity never exceeds the band's free-momentum range") {
  Rng rng(5);
  for (int i = 0; i < 30; ++i) {
    const double depth = 4.0 * rng.uniform();
    const int band = 1 + static_cast<int>(rng.uniform() * 4.0);
    const double q = -1.0 + 2.0 * rng.uniform();
    const auto sol = solve_bands(depth, {q}, band);
    const auto bp = band_point(sol, band, q);
    CHECK(std::abs(bp.group_velocity) <= band + 1e-9);
  }
}

TEST_CASE("packet decomposition: free lattice concentrates on one band") {
  const auto sol = solve_bands(0.0, zone_grid(1024), 3);
  const auto packet = initial_packet(0.5, 0.05);
  const auto dec = decompose_packet([&](double p) { return std::complex<double>(packet(p)); },
                                    sol);
  CHECK(dec.total == Catch::Approx(1.0).margin(1e-8));
  CHECK(dec.weights[0] == Catch::Approx(1.0).margin(1e-8));
}

TEST_CASE("packet decomposition: completeness and parity at finite depth") {
  const auto sol = solve_bands(2.8, zone_grid(1024), 6);
  const auto packet = initial_packet(3.75, 1.0 / 30.0);
  const auto dec = decompose_packet([&](double p) { return std::complex<double>(packet(p)); },
                                    sol);
  CHECK(dec.total == Catch::Approx(1.0).margin(1e-8));
  // dominant band is the folded one, with weight noticeably below 1
  CHECK(dec.weights[3] > 0.5);
  CHECK(dec.weights[3] < 0.99);

  const auto packet_m = initial_packet(-3.75, 1.0 / 30.0);
  const auto dec_m = decompose_packet(
      [&](double p) { return std::complex<double>(packet_m(p)); }, sol);
  for (int b = 0; b < 6; ++b)
    CHECK(dec.weights[b] == Catch::Approx(dec_m.weights[b]).margin(1e-10));
}

TEST_CASE("packet decomposition rejects support overflow") {
  const auto sol = solve_bands(0.7, zone_grid(256), 2);  // covers |p| <= 2 only
  const auto packet = initial_packet(3.75, 0.05);
  CHECK_THROWS_AS(decompose_packet([&](double p) { return std::complex<double>(packet(p)); },
                                   sol),
                  Error);
}

TEST_CASE("plane-wave cutoff converges automatically or reports failure") {
  // depth far beyond any sane value cannot converge within the cutoff cap
  CHECK_THROWS_AS(solve_bands(1e8, {0.0}, 1, 8), Error);
  // a deep but reasonable lattice converges and matches the dense oracle
  const auto sol = solve_bands(14.0, {0.58}, 3, 12);
  const auto dense = oracle::dense_band_energies(14.0, 0.58, 96, 3);
  CHECK(sol.energy(3, 0) == Catch::Approx(dense[2]).margin(1e-8));
}

TEST_CASE("energy matching inverts the dispersion on the propagating branch") {
  const auto free_sol = solve_bands(0.0, zone_grid(16), 5);
  const double e_in = 0.5 * 3.75 * 3.75;
  CHECK(energy_matched_q(free_sol, 4, e_in) == Catch::Approx(-0.25).margin(1e-9));

  const auto sol = solve_bands(2.8, zone_grid(16), 5);
  const double q_star = energy_matched_q(sol, 4, e_in);
  CHECK(band_point(sol, 4, q_star).energy == Catch::Approx(e_in).margin(1e-9));
  CHECK(q_star == Catch::Approx(-0.66).margin(0.01));
  CHECK(band_point(sol, 4, q_star).group_velocity > 0.0);
}
