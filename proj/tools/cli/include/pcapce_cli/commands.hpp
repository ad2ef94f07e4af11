#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "pcapce_cli/config.hpp"

namespace spdlog {
class logger;
}

namespace pcapce::cli {

/// File layout of one run directory. Stages are numbered from 1; band index
/// 0 is the prior predictive.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path resolved_config() const { return root / "resolved_config.json"; }
  std::filesystem::path log() const { return root / "run.log"; }
  std::filesystem::path design() const { return root / "design.csv"; }
  std::filesystem::path test_design() const { return root / "test_design.csv"; }
  std::filesystem::path ensemble(std::size_t stage) const { return staged("ensemble", stage, ".csv"); }
  std::filesystem::path test_ensemble(std::size_t stage) const { return staged("test_ensemble", stage, ".csv"); }
  std::filesystem::path truth(std::size_t stage) const { return staged("truth", stage, ".csv"); }
  std::filesystem::path observations(std::size_t stage) const { return staged("observations", stage, ".csv"); }
  std::filesystem::path surrogate(std::size_t stage) const { return staged("surrogate", stage, ".json"); }
  std::filesystem::path validation() const { return root / "validation.json"; }
  std::filesystem::path mape_sweep() const { return root / "mape_sweep.csv"; }
  std::filesystem::path mape_curve() const { return root / "mape_curve.csv"; }
  std::filesystem::path chains(std::size_t stage) const { return staged("chains", stage, ".csv"); }
  std::filesystem::path summary(std::size_t stage) const { return staged("summary", stage, ".json"); }
  std::filesystem::path band(std::size_t t, std::size_t stage) const {
    return root / ("band_t" + std::to_string(t) + "_stage" + std::to_string(stage) + ".csv");
  }
  std::filesystem::path report_dir() const { return root / "report"; }

 private:
  std::filesystem::path staged(const char* stem, std::size_t stage, const char* ext) const {
    return root / (std::string(stem) + "_stage" + std::to_string(stage) + ext);
  }
};

struct Context {
  RunConfig config;
  RunPaths paths;
  std::shared_ptr<spdlog::logger> log;
};

/// Creates the output directory, writes resolved_config.json and opens the
/// log (console plus a timestamped run.log sidecar).
Context make_context(RunConfig config, const std::filesystem::path& out_dir, bool quiet = false);

void cmd_doe(const Context& ctx);
void cmd_simulate(const Context& ctx);
void cmd_train(const Context& ctx);
void cmd_validate(const Context& ctx);
void cmd_invert(const Context& ctx);
void cmd_report(const Context& ctx);

/// One point of the training-size sweep.
struct SweepRow {
  std::uint64_t seed = 0;
  std::size_t K = 0;
  std::size_t stage = 0;
  SurrogateMode mode = SurrogateMode::PcaPce;
  double mape = 0.0;          // NaN when training failed
  long long n_retained = -1;  // -1 in pointwise mode or on failure
};

/// Trains both surrogate modes for every (seed, K, stage) in the sweep and
/// scores them on a fresh test design per seed.
std::vector<SweepRow> mape_sweep(const RunConfig& config, spdlog::logger* log = nullptr);

/// Median over seeds of the finite MAPE values for one (K, stage, mode).
double sweep_median(const std::vector<SweepRow>& rows, std::size_t K, std::size_t stage, SurrogateMode mode);

/// Maps a caught exception to the process exit code: 2 for invalid input or
/// configuration, 3 for numerical failure.
int exit_code_for(const std::exception& e);

}  // namespace pcapce::cli
