#ifdef PCAPCE_CLI11_PACKAGE
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif
#include <spdlog/spdlog.h>

#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "pcapce/error.hpp"
#include "pcapce_cli/commands.hpp"
#include "pcapce_cli/config.hpp"

namespace cli = pcapce::cli;

int main(int argc, char** argv) {
  CLI::App app{"Staged Bayesian calibration of a laterally loaded pile with PCA-PCE surrogates"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  bool quiet = false;
  app.add_option("--config", config_path, "TOML run configuration (defaults when omitted)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Override every seed in the configuration");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_flag("-q,--quiet", quiet, "Log to run.log only");

  using Step = std::function<void(const cli::Context&)>;
  const std::vector<std::pair<std::string, std::vector<Step>>> commands{
      {"doe", {cli::cmd_doe}},
      {"simulate", {cli::cmd_simulate}},
      {"train", {cli::cmd_train}},
      {"validate", {cli::cmd_validate}},
      {"invert", {cli::cmd_invert}},
      {"report", {cli::cmd_report}},
      {"run", {cli::cmd_doe, cli::cmd_simulate, cli::cmd_train, cli::cmd_invert, cli::cmd_report}},
  };
  const std::vector<std::string> help{
      "Write the training and test designs",
      "Run the forward model on both designs for every stage",
      "Fit one surrogate per stage and score it on the test runs",
      "Sweep the training size and write the MAPE curve",
      "Sequential Bayesian update over the stages",
      "Render band plots, the MAPE curve and a summary",
      "doe, simulate, train, invert and report in sequence",
  };
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < commands.size(); ++i) subs.push_back(app.add_subcommand(commands[i].first, help[i]));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    cli::RunConfig config = config_path.empty() ? cli::RunConfig{} : cli::load_config(config_path);
    if (seed) cli::override_seed(config, *seed);
    const cli::Context ctx = cli::make_context(std::move(config), out_dir, quiet);
    for (std::size_t i = 0; i < commands.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      for (const auto& step : commands[i].second) step(ctx);
    }
    spdlog::shutdown();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::exit_code_for(e);
  }
}
