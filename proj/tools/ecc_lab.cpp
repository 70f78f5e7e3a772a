// ecc_lab: generate synthetic data, train under the class-center losses,
// check gradients, and inspect finished runs.

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "ecc/commands.hpp"

int main(int argc, char** argv) {
  namespace cli = ecc::cli;

  CLI::App app{"Class-center loss lab: data generation, training, gradient checks, run inspection"};
  app.set_version_flag("--version", cli::kToolVersion);
  app.require_subcommand(1);

  std::string spec_path, data_out;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic fine-grained dataset");
  gen->add_option("--spec", spec_path, "Synthetic spec JSON")->required();
  gen->add_option("--out", data_out, "Output directory")->required();

  std::string config_path, run_out;
  auto* train = app.add_subcommand("train", "Train a model and write a run directory");
  train->add_option("--config", config_path, "Run config JSON")->required();
  train->add_option("--out", run_out, "Run directory")->required();

  std::uint64_t seed = ecc::gradcheck::Options{}.seed;
  long long trials = 100;
  auto* grad = app.add_subcommand("grad-check", "Compare analytic gradients with finite differences");
  grad->add_option("--seed", seed, "Base seed")->capture_default_str();
  grad->add_option("--trials", trials, "Random instances per component")->capture_default_str();

  std::string run_dir;
  auto* inspect = app.add_subcommand("inspect", "Regenerate reports from a run directory");
  inspect->add_option("run-dir", run_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kBadInput;
  }

  if (gen->parsed()) return cli::cmd_gen_data(spec_path, data_out, std::cout, std::cerr);
  if (train->parsed()) return cli::cmd_train(config_path, run_out, std::cout, std::cerr);
  if (grad->parsed()) {
    if (trials < 1) {
      std::cerr << "grad-check: --trials must be >= 1\n" << app.get_subcommand("grad-check")->help();
      return cli::kBadInput;
    }
    return cli::cmd_grad_check(seed, static_cast<std::size_t>(trials), std::cout, std::cerr);
  }
  if (inspect->parsed()) return cli::cmd_inspect(run_dir, std::cout, std::cerr);
  return cli::kBadInput;
}
