#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "qnd/errors.hpp"
#include "qnd/field.hpp"
#include "qnd/model.hpp"

namespace qnd {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Run configuration: one JSON document drives every subcommand. Unknown keys
// are rejected so typos cannot silently change a run, and the fully resolved
// document is echoed into the run manifest, which can itself be fed back as a
// config to reproduce the run.
// ---------------------------------------------------------------------------

struct BandsOptions {
  double depth = 0.5;
  int n_bands = 3;
  int q_points = 512;
  int cutoff = 32;
};

struct SemianalyticOptions {
  double x_min = std::numeric_limits<double>::quiet_NaN();  // NaN: derived from band drift
  double x_max = std::numeric_limits<double>::quiet_NaN();
  int n_points = 4001;
};

struct EntropyOptions {
  double t_max = std::numeric_limits<double>::quiet_NaN();  // NaN: use t_f
  int n_times = 201;
};

struct QFunctionOptions {
  PhaseSpaceGrid grid;
  double alpha_re = std::numeric_limits<double>::quiet_NaN();  // NaN: sqrt(nbar)
  double alpha_im = 0.0;
};

struct PropagateCmdOptions {
  std::vector<int> n_list;  // empty: 0 .. n_max
  double sample_every = 1.0;
};

struct MeasureOptions {
  int n_cascades = 1;
  int max_atoms = 50;
  double collapse_threshold = 0.99;
  bool weight_by_transmission = false;
  std::vector<int> q_snapshots;
  std::vector<double> l_values;                    // optional cavity-length sweep
  std::vector<std::pair<double, double>> t_f_by_l; // required with l_values
  double x0_offset = -70.0;                        // x0 = -L/2 + offset in sweeps
};

struct RunConfig {
  std::string command;
  SimulationParams params;
  BandsOptions bands;
  SemianalyticOptions semianalytic;
  EntropyOptions entropy;
  QFunctionOptions qfunction;
  PropagateCmdOptions propagate;
  MeasureOptions measure;
  json resolved;  // the validated document, echoed into manifests
};

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed,
                       const std::string& ctx) {
  require(j.is_object(), ErrKind::invalid_config, ctx + " must be a JSON object");
  for (const auto& item : j.items())
    require(allowed.count(item.key()) != 0, ErrKind::invalid_config,
            "unknown key '" + item.key() + "' in " + ctx);
}

inline double num(const json& j, const std::string& key, double fallback,
                  bool* present = nullptr) {
  if (!j.contains(key)) {
    if (present) *present = false;
    return fallback;
  }
  require(j[key].is_number(), ErrKind::invalid_config, "'" + key + "' must be a number");
  if (present) *present = true;
  return j[key].get<double>();
}

inline double required_num(const json& j, const std::string& key) {
  require(j.contains(key), ErrKind::invalid_config, "missing required parameter '" + key + "'");
  require(j[key].is_number(), ErrKind::invalid_config, "'" + key + "' must be a number");
  return j[key].get<double>();
}

inline int next_pow2(double x) {
  int n = 16;
  while (n < x) {
    require(n < (1 << 24), ErrKind::invalid_config, "grid would need more than 2^24 points");
    n *= 2;
  }
  return n;
}

}  // namespace detail

// Grid sized so that neither the transmitted packet nor the back-scattered
// one can reach an edge by t_f: forward reach is bounded by x0 + p0 t_f, the
// reflected packet by free motion at -p0 from the entrance mirror.
inline GridSpec auto_grid(const SimulationParams& p, double spacing_target = 0.05) {
  const double sx = p.dx_packet > 0.0 ? p.dx_packet : 0.5 / p.dp;
  const double sigma_t = std::sqrt(sx * sx + std::pow(p.t_f / (2.0 * sx), 2));
  const double pad = 10.0 * sigma_t + 50.0;
  const double t_enter = p.x0 < -0.5 * p.L ? (-0.5 * p.L - p.x0) / std::max(p.p0, 1e-6) : 0.0;
  const double x_max = std::max(p.x0 + p.p0 * p.t_f, 0.5 * p.L) + pad;
  const double x_min =
      std::min(p.x0, -0.5 * p.L - p.p0 * std::max(0.0, p.t_f - t_enter)) - pad;
  GridSpec g;
  g.x_min = x_min;
  g.x_max = x_max;
  g.n_points = detail::next_pow2((x_max - x_min) / spacing_target);
  return g;
}

inline RunConfig parse_config(json doc) {
  // Accept a manifest as a config: unwrap its resolved document.
  if (doc.is_object() && doc.contains("config")) {
    json inner = doc["config"];
    if (doc.contains("command") && !inner.contains("command")) inner["command"] = doc["command"];
    if (doc.contains("seed") && !inner.contains("seed")) inner["seed"] = doc["seed"];
    doc = std::move(inner);
  }

  static const std::set<std::string> top_keys = {
      "command", "U",      "g0",           "delta",   "L",       "X_s",
      "p0",      "dp",     "dx_packet",    "x0",      "nbar",    "n_max",
      "dt",      "t_f",    "seed",         "grid",    "bands",   "semianalytic",
      "entropy", "qfunction", "propagate", "measure"};
  detail::check_keys(doc, top_keys, "config");

  RunConfig cfg;
  require(doc.contains("command") && doc["command"].is_string(), ErrKind::invalid_config,
          "missing required parameter 'command'");
  cfg.command = doc["command"].get<std::string>();
  static const std::set<std::string> commands = {"bands",     "semianalytic", "entropy",
                                                 "propagate", "measure",      "qfunction"};
  require(commands.count(cfg.command) != 0, ErrKind::invalid_config,
          "unknown command '" + cfg.command + "'");

  SimulationParams& p = cfg.params;
  p.U = detail::num(doc, "U", 0.0);
  p.g0 = detail::num(doc, "g0", 0.0);
  p.delta = detail::num(doc, "delta", 0.0);
  p.L = detail::num(doc, "L", 0.0);
  p.X_s = detail::num(doc, "X_s", 0.0);
  p.p0 = detail::num(doc, "p0", 0.0);
  p.dp = detail::num(doc, "dp", 0.0);
  p.dx_packet = detail::num(doc, "dx_packet", 0.0);
  p.x0 = detail::num(doc, "x0", 0.0);
  p.nbar = detail::num(doc, "nbar", 0.0);
  p.dt = detail::num(doc, "dt", 0.01);
  p.t_f = detail::num(doc, "t_f", 0.0);
  if (doc.contains("n_max")) {
    require(doc["n_max"].is_number_integer(), ErrKind::invalid_config,
            "'n_max' must be an integer");
    p.n_max = doc["n_max"].get<int>();
  }
  if (doc.contains("seed")) {
    require(doc["seed"].is_number_unsigned() || doc["seed"].is_number_integer(),
            ErrKind::invalid_config, "'seed' must be an integer");
    p.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("grid")) {
    const json& g = doc["grid"];
    detail::check_keys(g, {"x_min", "x_max", "n_points"}, "grid");
    p.grid.x_min = detail::required_num(g, "x_min");
    p.grid.x_max = detail::required_num(g, "x_max");
    require(g.contains("n_points") && g["n_points"].is_number_integer(), ErrKind::invalid_config,
            "grid needs integer 'n_points'");
    p.grid.n_points = g["n_points"].get<int>();
  }

  if (doc.contains("bands")) {
    const json& b = doc["bands"];
    detail::check_keys(b, {"depth", "n_bands", "q_points", "cutoff"}, "bands");
    cfg.bands.depth = detail::num(b, "depth", cfg.bands.depth);
    cfg.bands.n_bands = static_cast<int>(detail::num(b, "n_bands", cfg.bands.n_bands));
    cfg.bands.q_points = static_cast<int>(detail::num(b, "q_points", cfg.bands.q_points));
    cfg.bands.cutoff = static_cast<int>(detail::num(b, "cutoff", cfg.bands.cutoff));
  }
  if (doc.contains("semianalytic")) {
    const json& s = doc["semianalytic"];
    detail::check_keys(s, {"x_min", "x_max", "n_points"}, "semianalytic");
    cfg.semianalytic.x_min = detail::num(s, "x_min", cfg.semianalytic.x_min);
    cfg.semianalytic.x_max = detail::num(s, "x_max", cfg.semianalytic.x_max);
    cfg.semianalytic.n_points =
        static_cast<int>(detail::num(s, "n_points", cfg.semianalytic.n_points));
  }
  if (doc.contains("entropy")) {
    const json& e = doc["entropy"];
    detail::check_keys(e, {"t_max", "n_times"}, "entropy");
    cfg.entropy.t_max = detail::num(e, "t_max", cfg.entropy.t_max);
    cfg.entropy.n_times = static_cast<int>(detail::num(e, "n_times", cfg.entropy.n_times));
  }
  if (doc.contains("qfunction")) {
    const json& q = doc["qfunction"];
    detail::check_keys(q, {"re_min", "re_max", "im_min", "im_max", "n_re", "n_im", "alpha_re",
                           "alpha_im"},
                       "qfunction");
    cfg.qfunction.grid.re_min = detail::num(q, "re_min", cfg.qfunction.grid.re_min);
    cfg.qfunction.grid.re_max = detail::num(q, "re_max", cfg.qfunction.grid.re_max);
    cfg.qfunction.grid.im_min = detail::num(q, "im_min", cfg.qfunction.grid.im_min);
    cfg.qfunction.grid.im_max = detail::num(q, "im_max", cfg.qfunction.grid.im_max);
    cfg.qfunction.grid.n_re = static_cast<int>(detail::num(q, "n_re", cfg.qfunction.grid.n_re));
    cfg.qfunction.grid.n_im = static_cast<int>(detail::num(q, "n_im", cfg.qfunction.grid.n_im));
    cfg.qfunction.alpha_re = detail::num(q, "alpha_re", cfg.qfunction.alpha_re);
    cfg.qfunction.alpha_im = detail::num(q, "alpha_im", cfg.qfunction.alpha_im);
  }
  if (doc.contains("propagate")) {
    const json& pr = doc["propagate"];
    detail::check_keys(pr, {"n_list", "sample_every"}, "propagate");
    if (pr.contains("n_list")) {
      require(pr["n_list"].is_array(), ErrKind::invalid_config, "'n_list' must be an array");
      for (const auto& v : pr["n_list"]) {
        require(v.is_number_integer() && v.get<int>() >= 0, ErrKind::invalid_config,
                "'n_list' entries must be nonnegative integers");
        cfg.propagate.n_list.push_back(v.get<int>());
      }
    }
    cfg.propagate.sample_every = detail::num(pr, "sample_every", cfg.propagate.sample_every);
  }
  if (doc.contains("measure")) {
    const json& m = doc["measure"];
    detail::check_keys(m,
                       {"n_cascades", "max_atoms", "collapse_threshold",
                        "weight_by_transmission", "q_snapshots", "L_values", "t_f_by_L",
                        "x0_offset"},
                       "measure");
    cfg.measure.n_cascades = static_cast<int>(detail::num(m, "n_cascades", 1));
    cfg.measure.max_atoms = static_cast<int>(detail::num(m, "max_atoms", 50));
    cfg.measure.collapse_threshold = detail::num(m, "collapse_threshold", 0.99);
    if (m.contains("weight_by_transmission")) {
      require(m["weight_by_transmission"].is_boolean(), ErrKind::invalid_config,
              "'weight_by_transmission' must be a boolean");
      cfg.measure.weight_by_transmission = m["weight_by_transmission"].get<bool>();
    }
    if (m.contains("q_snapshots"))
      for (const auto& v : m["q_snapshots"]) cfg.measure.q_snapshots.push_back(v.get<int>());
    if (m.contains("L_values"))
      for (const auto& v : m["L_values"]) cfg.measure.l_values.push_back(v.get<double>());
    if (m.contains("t_f_by_L")) {
      require(m["t_f_by_L"].is_object(), ErrKind::invalid_config, "'t_f_by_L' must be an object");
      for (const auto& item : m["t_f_by_L"].items())
        cfg.measure.t_f_by_l.emplace_back(std::stod(item.key()), item.value().get<double>());
    }
    cfg.measure.x0_offset = detail::num(m, "x0_offset", cfg.measure.x0_offset);
  }

  // Command-scoped validation of module preconditions before any compute.
  const bool needs_packet = cfg.command != "bands" && cfg.command != "qfunction";
  const bool sweep = cfg.command == "measure" && !cfg.measure.l_values.empty();
  const bool needs_cavity = cfg.command == "propagate" ||
                            (cfg.command == "measure" && !sweep);
  if (needs_packet) {
    require(doc.contains("U"), ErrKind::invalid_config, "missing required parameter 'U'");
    require(doc.contains("p0"), ErrKind::invalid_config, "missing required parameter 'p0'");
    require(doc.contains("dp") || doc.contains("dx_packet"), ErrKind::invalid_config,
            "missing required parameter 'dp' or 'dx_packet'");
    require(doc.contains("nbar"), ErrKind::invalid_config, "missing required parameter 'nbar'");
    require(sweep || doc.contains("t_f"), ErrKind::invalid_config,
            "missing required parameter 't_f'");
  }
  if (sweep) {
    for (double l : cfg.measure.l_values) {
      bool found = false;
      for (auto& [lv, tf] : cfg.measure.t_f_by_l) found |= lv == l;
      require(found, ErrKind::invalid_config,
              "measure.t_f_by_L must provide t_f for every entry of L_values");
    }
  }
  if (needs_cavity) {
    require(doc.contains("L"), ErrKind::invalid_config, "missing required parameter 'L'");
    require(doc.contains("X_s"), ErrKind::invalid_config, "missing required parameter 'X_s'");
    require(doc.contains("x0"), ErrKind::invalid_config, "missing required parameter 'x0'");
    if (!doc.contains("grid")) {
      // Derived fields must be in place before sizing the grid.
      SimulationParams probe = p;
      if (!(probe.dp > 0.0)) probe.dp = 0.5 / probe.dx_packet;
      if (!(probe.dx_packet > 0.0)) probe.dx_packet = 0.5 / probe.dp;
      p.grid = auto_grid(probe);
      doc["grid"] = {{"x_min", p.grid.x_min},
                     {"x_max", p.grid.x_max},
                     {"n_points", p.grid.n_points}};
    }
    p.finalize();
    doc["n_max"] = p.n_max;
  } else if (needs_packet) {
    // Ideal-lattice commands: validate the packet and field pieces only.
    require(p.U >= 0.0, ErrKind::invalid_config, "U must be nonnegative");
    require((p.dp > 0.0) != (p.dx_packet > 0.0), ErrKind::invalid_config,
            "exactly one of dp / dx_packet must be given");
    if (p.dp > 0.0)
      p.dx_packet = 0.5 / p.dp;
    else
      p.dp = 0.5 / p.dx_packet;
    require(p.nbar >= 0.0, ErrKind::invalid_config, "nbar must be nonnegative");
    if (p.n_max < 0) p.n_max = default_fock_cutoff(p.nbar);
    require(sweep || p.t_f > 0.0, ErrKind::invalid_config, "t_f must be positive");
    doc["n_max"] = p.n_max;
  } else if (cfg.command == "qfunction") {
    require(doc.contains("nbar") || doc.contains("n_max") ||
                (doc.contains("qfunction") && doc["qfunction"].contains("alpha_re")),
            ErrKind::invalid_config, "qfunction needs 'nbar' (or n_max/alpha overrides)");
    if (p.n_max < 0) p.n_max = default_fock_cutoff(p.nbar);
    doc["n_max"] = p.n_max;
  }

  doc["seed"] = p.seed;
  cfg.resolved = std::move(doc);
  return cfg;
}

inline RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrKind::io, "cannot open config file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    raise(ErrKind::invalid_config, std::string("config parse error: ") + e.what());
  }
  return parse_config(std::move(doc));
}

// Dotted-path override, e.g. "grid.n_points=65536" or "measure.L_values=[600]".
// The value is parsed as JSON when possible and falls back to a string.
inline void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos && eq > 0, ErrKind::invalid_config,
          "override must look like key=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (...) {
    parsed = value;
  }
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    require(!key.empty(), ErrKind::invalid_config, "bad override path: " + path);
    if (dot == std::string::npos) {
      (*node)[key] = parsed;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

// ---------------------------------------------------------------------------
// Bundled parameter presets fig1 .. fig7 (the scenarios in README.md).
// ---------------------------------------------------------------------------

inline json preset(const std::string& id) {
  const double p0_ideal = 2.58;
  json base_cavity = {
      {"U", 0.7},   {"X_s", 0.2},        {"p0", 3.75}, {"dx_packet", 15.0},
      {"nbar", 4.0}, {"dt", 0.01},       {"seed", 1},
  };
  if (id == "fig1") {
    return json{{"command", "bands"},
                {"seed", 1},
                {"bands", {{"depth", 0.5}, {"n_bands", 3}, {"q_points", 512}, {"cutoff", 32}}}};
  }
  if (id == "fig2" || id == "fig3") {
    json j = {{"command", id == "fig2" ? "semianalytic" : "entropy"},
              {"U", 0.7},
              {"p0", p0_ideal},
              {"dp", p0_ideal / 50.0},
              {"nbar", 4.0},
              {"t_f", 400.0},
              {"seed", 1}};
    if (id == "fig3") j["entropy"] = {{"t_max", 400.0}, {"n_times", 201}};
    return j;
  }
  if (id == "fig4") {
    json j = base_cavity;
    j["command"] = "propagate";
    j["L"] = 1400.0;
    j["x0"] = -770.0;
    j["t_f"] = 660.0;
    j["propagate"] = {{"n_list", {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}}, {"sample_every", 1.0}};
    return j;
  }
  if (id == "fig5") {
    json j = base_cavity;
    j["command"] = "measure";
    j["measure"] = {{"n_cascades", 1},
                    {"max_atoms", 50},
                    {"collapse_threshold", 0.99},
                    {"weight_by_transmission", false},
                    {"L_values", {1400.0, 600.0, 200.0}},
                    {"t_f_by_L", {{"1400", 660.0}, {"600", 340.0}, {"200", 200.0}}},
                    {"x0_offset", -70.0}};
    return j;
  }
  if (id == "fig6") {
    json j = base_cavity;
    j["command"] = "measure";
    j["L"] = 600.0;
    j["x0"] = -370.0;
    j["t_f"] = 340.0;
    j["measure"] = {{"n_cascades", 1},
                    {"max_atoms", 50},
                    {"collapse_threshold", 0.99},
                    {"q_snapshots", {0, 1, 5, 10}}};
    return j;
  }
  if (id == "fig7") {
    json j = base_cavity;
    j["command"] = "propagate";
    j["L"] = 600.0;
    j["x0"] = -370.0;
    j["t_f"] = 340.0;
    j["propagate"] = {{"n_list", {0, 1, 2, 3, 4}}, {"sample_every", 1.0}};
    return j;
  }
  raise(ErrKind::invalid_config, "unknown preset '" + id + "' (expected fig1 .. fig7)");
}

}  // namespace qnd
