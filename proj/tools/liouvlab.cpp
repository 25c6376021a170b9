#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "liouvlab/config.hpp"
#include "liouvlab/experiments.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::uint64_t> threads;
  std::optional<std::uint64_t> count;
  std::vector<std::string> overrides;  // section.key=value
  bool dump = false;
};

// "section.key=value" parsed as a one-line TOML table
liouvlab::ExperimentConfig apply_override(const std::string& item, liouvlab::ExperimentConfig cfg) {
  const auto eq = item.find('=');
  if (eq == std::string::npos) throw liouvlab::ConfigError("--set expects key=value, got '" + item + "'");
  const std::string key = item.substr(0, eq);
  const auto dot = key.rfind('.');
  const std::string text = dot == std::string::npos
                               ? key + " = " + item.substr(eq + 1)
                               : "[" + key.substr(0, dot) + "]\n" + key.substr(dot + 1) + " = " + item.substr(eq + 1);
  try {
    cfg = liouvlab::parse_toml(text, std::move(cfg));
    cfg.lines.erase(key);
    return cfg;
  } catch (const liouvlab::ConfigError& e) {
    throw liouvlab::ConfigError(std::string("--set ") + item + ": " + e.what(), 0, e.key);
  }
}

int execute(const std::string& experiment, const Flags& flags) {
  using namespace liouvlab;
  ExperimentConfig cfg;
  try {
    cfg = default_config(experiment);
    if (!flags.config.empty()) {
      cfg = load_config(flags.config, cfg);
      if (cfg.experiment != experiment) {
        const auto it = cfg.lines.find("experiment");
        throw ConfigError("config is for '" + cfg.experiment + "' but the subcommand is '" + experiment + "'",
                          it == cfg.lines.end() ? 0 : it->second, "experiment");
      }
    }
    for (const auto& item : flags.overrides) cfg = apply_override(item, std::move(cfg));
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.out) cfg.out = *flags.out;
    if (flags.threads) cfg.threads = *flags.threads;
    if (flags.count) cfg.count = *flags.count;
    if (cfg.experiment != experiment) throw ConfigError("--set cannot change the experiment", 0, "experiment");
    cfg.validate();
  } catch (const ConfigError& e) {
    std::cerr << "config error";
    if (!flags.config.empty()) std::cerr << " in " << flags.config;
    if (e.line > 0) std::cerr << " line " << e.line;
    std::cerr << ": " << e.what() << "\n";
    return 2;
  }
  if (flags.dump) {
    std::cout << cfg.to_toml();
    return 0;
  }
  return run(cfg, std::cout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical lab for statistical Liouville equations"};
  app.require_subcommand(1);
  Flags flags;
  for (const auto& name : liouvlab::kExperiments) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", flags.config, "TOML or JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "master seed (U64)");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--threads", flags.threads, "worker thread cap (0: all cores)");
    sub->add_option("--count", flags.count, "ensemble size");
    sub->add_option("--set", flags.overrides, "override a config key, e.g. --set flow.dt=5e-4");
    sub->add_flag("--dump-config", flags.dump, "print the resolved config as TOML and exit");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  for (const auto* sub : app.get_subcommands()) return execute(sub->get_name(), flags);
  return 2;
}
