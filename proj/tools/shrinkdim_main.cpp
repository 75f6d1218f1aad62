#include "shrinkdim/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

using namespace shrinkdim;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNumericalFailure = 3;

struct Options {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

int run(const std::string& command, const Options& o) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(o.config);
    if (o.out) cfg.out = *o.out;
    if (o.seed) cfg.seed = *o.seed;
    if (o.threads) {
      if (*o.threads < 1) throw ConfigError("--threads must be positive");
      cfg.threads = *o.threads;
    }
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  try {
    const RunOutput result = run_command(command, cfg);
    for (const auto& p : write_run(result, cfg, cfg.out)) std::cout << p.string() << "\n";
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shrinking-target parameter sets of piecewise expanding maps"};
  app.require_subcommand(1);
  Options o;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"orbit", "orbit, itinerary and derivatives at one parameter"},
      {"partition", "continuity partition at generation n"},
      {"pressure", "pressure table and its root for each alpha"},
      {"cover", "shrinking-target covers and their critical exponent"},
      {"escape", "escape-time tail of the iterate-wrapped family"},
      {"cantor", "Cantor construction, mass measure and local exponent"},
      {"density", "invariant density and entropy"},
      {"dimension", "upper and lower dimension estimates for each alpha"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--threads", o.threads, "worker threads");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  return run(app.get_subcommands().front()->get_name(), o);
}
