// voltctl: run, oracle, certify, sweep, validate.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "voltctl/commands.hpp"

namespace {

struct ConfigArgs {
  std::string config;
  std::vector<std::string> set;
  std::optional<std::uint64_t> seed;
  std::optional<long> horizon;
  std::string out;

  void add_to(CLI::App* cmd, bool run_flags) {
    cmd->add_option("config", config, "Run config (YAML)")->required();
    cmd->add_option("--set", set, "Override a config key, e.g. scenario.horizon=500");
    cmd->add_option("--out", out, "Output directory (default: output.dir of the config)");
    if (run_flags) {
      cmd->add_option("--seed", seed, "Override seed");
      cmd->add_option("--horizon", horizon, "Override scenario.horizon");
    }
  }

  std::vector<std::string> overrides() const {
    std::vector<std::string> all = set;
    if (seed) all.push_back("seed=" + std::to_string(*seed));
    if (horizon) all.push_back("scenario.horizon=" + std::to_string(*horizon));
    return all;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed voltage control simulator"};
  app.require_subcommand(1);

  ConfigArgs run_args, oracle_args, certify_args;
  auto* run_cmd = app.add_subcommand("run", "Simulate the closed loop and write trace and summary files");
  run_args.add_to(run_cmd, true);
  auto* oracle_cmd = app.add_subcommand("oracle", "Solve the voltage problem centrally and write oracle.json");
  oracle_args.add_to(oracle_cmd, false);
  auto* certify_cmd = app.add_subcommand("certify", "Compute step-size bounds and write certificate.json");
  certify_args.add_to(certify_cmd, false);

  std::vector<std::string> patterns, sweep_set;
  std::string sweep_out = "sweep_out";
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  auto* sweep_cmd = app.add_subcommand("sweep", "Run many configs and tabulate their metrics");
  sweep_cmd->add_option("configs", patterns, "Config files or glob patterns")->required();
  sweep_cmd->add_option("--out", sweep_out, "Output directory");
  sweep_cmd->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--set", sweep_set, "Override a config key in every run");

  std::string network;
  auto* validate_cmd = app.add_subcommand("validate", "Lint a network file");
  validate_cmd->add_option("network", network, "Network file or builtin:sce56 / builtin:six_bus")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? voltctl::kExitOk : voltctl::kExitUsage;
  }

  try {
    if (validate_cmd->parsed()) return voltctl::cmd_validate(network, std::cout);
    if (sweep_cmd->parsed()) {
      const auto rows = voltctl::cmd_sweep(patterns, sweep_out, sweep_set, jobs, std::cout);
      for (const auto& r : rows) {
        if (!r.ok) return voltctl::kExitRunFailure;
      }
      return voltctl::kExitOk;
    }
    ConfigArgs& args = run_cmd->parsed() ? run_args : oracle_cmd->parsed() ? oracle_args : certify_args;
    const voltctl::RunConfig cfg = voltctl::load_config(args.config, args.overrides());
    const auto prepared = voltctl::prepare_run(cfg);
    const std::string out = args.out.empty() ? cfg.output.dir : args.out;
    if (run_cmd->parsed()) return voltctl::cmd_run(*prepared, out, std::cout).exit_code;
    if (oracle_cmd->parsed()) return voltctl::cmd_oracle(*prepared, out, std::cout);
    return voltctl::cmd_certify(*prepared, out, std::cout);
  } catch (const voltctl::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return voltctl::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return voltctl::kExitRunFailure;
  }
}
