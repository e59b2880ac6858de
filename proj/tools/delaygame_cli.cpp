#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "delaygame/commands.hpp"
#include "delaygame/config.hpp"

int main(int argc, char** argv) {
  using namespace delaygame;
  CLI::App app{"Non-zero-sum delayed forward-backward stochastic games under partial information"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir = "./out";
  std::optional<int> paths, steps;
  std::optional<std::uint64_t> seed;
  std::string mode;
  app.add_option("--config", config_path, "model configuration (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--out-dir", out_dir, "directory for report.json and the CSV files")->capture_default_str();
  app.add_option("--paths", paths, "number of Monte Carlo paths (overrides the config)")->check(CLI::PositiveNumber);
  app.add_option("--steps", steps, "number of time steps on [0, T] (overrides the config)")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "master seed (overrides the config)");
  app.add_option("--mode", mode, "pension discount exponent")->check(CLI::IsMember({"paper", "derived"}));

  const std::map<std::string, std::string> about{
      {"simulate-forward", "simulate the delayed state under the default controls"},
      {"solve-lq", "filtered fixed point of the linear-quadratic game"},
      {"solve-pension", "closed-form equilibrium consumption of the pension game"},
      {"verify-nash", "unilateral deviations against the candidate equilibrium"},
      {"check-duality", "adjoint duality identity along fixed perturbations"},
      {"crosscheck-h4", "fixed point against the decoupled Riccati reduction"},
      {"verify-adaptedness", "controls measurable with respect to the observed noise"}};
  for (const std::string& name : subcommands()) {
    const auto it = about.find(name);
    app.add_subcommand(name, it == about.end() ? "" : it->second);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    ModelConfig cfg = load_config(config_path);
    Overrides o;
    o.paths = paths;
    o.steps = steps;
    o.seed = seed;
    if (!mode.empty()) o.mode = mode == "paper" ? DiscountMode::Paper : DiscountMode::Derived;
    apply_overrides(cfg, o);
    return run(app.get_subcommands().front()->get_name(), cfg, out_dir, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
}
