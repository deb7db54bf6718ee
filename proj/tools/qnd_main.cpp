#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "qnd/config.hpp"
#include "qnd/runner.hpp"
#include "qnd/version.hpp"

namespace {

struct CliOptions {
  std::string config_path;
  std::string preset_id;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
  long long seed = -1;
  bool seed_given = false;
};

int execute(const std::string& command, const CliOptions& opt) {
  try {
    qnd::json doc;
    if (!opt.preset_id.empty()) {
      doc = qnd::preset(opt.preset_id);
    } else if (!opt.config_path.empty()) {
      std::ifstream in(opt.config_path);
      qnd::require(in.good(), qnd::ErrKind::io, "cannot open config file: " + opt.config_path);
      try {
        in >> doc;
      } catch (const std::exception& e) {
        qnd::raise(qnd::ErrKind::invalid_config, std::string("config parse error: ") + e.what());
      }
    } else {
      doc = qnd::json::object();
    }
    if (!command.empty()) doc["command"] = command;
    if (opt.seed_given) doc["seed"] = opt.seed;
    for (const auto& o : opt.overrides) qnd::apply_override(doc, o);

    qnd::RunConfig cfg = qnd::parse_config(std::move(doc));
    qnd::RunOutcome outcome = qnd::run(cfg, opt.out_dir);
    for (const auto& f : outcome.outputs) std::printf("%s\n", f.c_str());
    std::printf("%s\n", outcome.manifest.c_str());
    return 0;
  } catch (const qnd::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cavity photon-number QND measurement simulator"};
  app.set_version_flag("--version", qnd::kVersion);

  CliOptions opt;
  std::string picked;
  const std::vector<std::string> commands = {"bands",     "semianalytic", "entropy",
                                             "propagate", "measure",      "qfunction"};
  for (const auto& name : commands) {
    auto* sub = app.add_subcommand(name);
    sub->callback([&picked, name] { picked = name; });
  }
  app.require_subcommand(0, 1);
  app.add_option("--config", opt.config_path, "JSON configuration file (or a run manifest)");
  app.add_option("--preset", opt.preset_id, "bundled parameter preset (fig1 .. fig7)");
  app.add_option("--out", opt.out_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", opt.seed, "override the RNG seed");
  app.add_option("--set", opt.overrides, "override a config key, e.g. --set grid.n_points=65536")
      ->take_all();

  CLI11_PARSE(app, argc, argv);
  opt.seed_given = seed_opt->count() > 0;

  if (picked.empty() && opt.preset_id.empty() && opt.config_path.empty()) {
    std::fprintf(stderr, "error: give a subcommand, --preset, or --config\n");
    return 2;
  }
  return execute(picked, opt);
}
