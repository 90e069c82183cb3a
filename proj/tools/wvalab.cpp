#include <iostream>

#include <CLI11.hpp>

#include "wvalab/commands.hpp"

using namespace wvalab;

int main(int argc, char** argv) {
  CLI::App app{"Weak-value metrology simulator", "wvalab"};
  app.set_version_flag("--version", WVALAB_VERSION);
  app.require_subcommand(1);

  cli::CommandOptions opts;
  std::optional<int> workers;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "Experiment config (JSON)");
    sub->add_option("--out", opts.out, "Output path");
    sub->add_option("--truncation", opts.truncation, "Override the Fock truncation");
    sub->add_option("--workers", workers, "Worker threads (default: WVALAB_WORKERS or all cores)")
        ->check(CLI::PositiveNumber);
  };

  auto* validate = app.add_subcommand("validate", "Run invariant checks on a configuration");
  auto* sweep = app.add_subcommand("sweep-squeeze", "Signed SNR ratio over the squeeze disc (CSV)");
  auto* snr = app.add_subcommand("snr", "SNR report (JSON)");
  auto* qfi = app.add_subcommand("qfi", "Quantum Fisher information report (JSON)");
  auto* sample = app.add_subcommand("sample", "Monte Carlo run with AMR and MLE estimates");
  for (auto* sub : {validate, sweep, snr, qfi, sample}) add_common(sub);
  sweep->add_option("--steps", opts.steps, "Grid points per axis");
  sample->add_option("--seed", opts.seed, "RNG seed (overrides mc.seed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kExitConfig;
  }

  try {
    opts.workers = workers ? *workers : cli::default_workers();
    if (*validate) return cli::cmd_validate(opts, std::cout);
    if (*sweep) return cli::cmd_sweep_squeeze(opts, std::cerr);
    if (*snr) return cli::cmd_snr(opts, std::cerr);
    if (*qfi) return cli::cmd_qfi(opts, std::cerr);
    return cli::cmd_sample(opts, std::cerr);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return cli::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
