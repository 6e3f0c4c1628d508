#include "febounds/cli.hpp"

#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "febounds/errors.hpp"
#include "febounds/experiment.hpp"

namespace febounds {

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-sided bounds on the interface free energy of coupled subsystems", "febounds"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_prefix;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  bool oracle_fed = false;

  struct Command {
    const char* name;
    const char* help;
    std::vector<std::string> (*run)(const ExperimentConfig&, const RunOptions&);
  };
  const Command commands[] = {
      {"bounds", "Bogoliubov bounds, Delta F by thermodynamic integration, separability report",
       &run_bounds},
      {"curve", "Variational homotopy bounds over the alpha grid", &run_curve},
      {"oracle", "Exact reference values as a JSON fixture", &run_oracle},
      {"compare", "Naive exponential estimator vs thermodynamic integration over repetitions",
       &run_compare},
  };
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path, "Experiment config (JSON)")->required();
    sub->add_option("--output", output_prefix, "Output path prefix (overrides config outputs)");
    sub->add_option("--seed", seed, "Base seed (overrides config seed)");
    sub->add_option("--workers", workers, "Worker threads; never changes the output")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--oracle-fed", oracle_fed, "Use exact oracle means instead of MCMC");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitConfig;
  }

  const Command* chosen = nullptr;
  for (const auto& c : commands)
    if (app.got_subcommand(c.name)) chosen = &c;

  try {
    ExperimentConfig config = load_experiment_config(config_path);
    if (seed) config.seed = *seed;
    RunOptions options;
    options.output_prefix = output_prefix;
    options.workers = workers;
    options.oracle_fed = oracle_fed;
    options.command_line = fmt::format("febounds {} --config {}", chosen->name, config_path);
    if (seed) options.command_line += fmt::format(" --seed {}", *seed);
    if (oracle_fed) options.command_line += " --oracle-fed";
    for (const auto& path : chosen->run(config, options)) out << path << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ValidationError& e) {
    err << "invalid model: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InputError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SamplerError& e) {
    err << "sampler failure: " << e.what() << "\n";
    return kExitSampler;
  } catch (const OracleRefusal& e) {
    err << "oracle refused: " << e.what() << "\n";
    return kExitOracle;
  } catch (const NumericalError& e) {
    err << "oracle failure: " << e.what() << "\n";
    return kExitOracle;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace febounds
