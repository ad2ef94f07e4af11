#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "pcapce/doe.hpp"
#include "pcapce/forward.hpp"
#include "pcapce/inference.hpp"
#include "pcapce/surrogate.hpp"

namespace pcapce::cli {

struct StageConfig {
  double v_g_m = 0.0;
};

struct DoeConfig {
  std::size_t K = 14;
  std::uint64_t seed = 2024;
  bool jitter = true;
};

/// Test runs for the MAPE check and the training-size sweep.
struct ValidateConfig {
  std::size_t K_test = 7;
  std::string split = "fresh-lhs";  // or "holdout": extra rows appended to the training design
  std::uint64_t seed = 7;
  std::vector<std::size_t> sweep_K{3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14};
  std::vector<std::uint64_t> sweep_seeds{1, 2, 3, 4, 5};
};

/// Synthetic field data: the forward model at these inputs plus Gaussian noise.
struct TruthConfig {
  double G0 = 0.0;
  double K0 = 0.0;
  double OCR = 0.0;
  double noise_sd_m = 0.001;
  std::uint64_t seed = 11;

  Vector x() const { return Vector{{G0, K0, OCR}}; }
};

struct RunConfig {
  std::string case_name = "default";
  PriorSpec prior = pile_soil_prior();
  PileConfig pile;
  std::vector<StageConfig> stages{{0.02}, {0.20}};
  DoeConfig doe;
  SurrogateConfig surrogate;
  McmcConfig mcmc;
  std::size_t chain_thin = 10;  // every n-th step goes to the chain CSV
  std::optional<TruthConfig> truth;
  ValidateConfig validate;

  /// Throws ConfigInvalid on any inconsistency.
  void check() const;
};

RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

/// Every setting, defaults included, in the same layout the config file uses.
nlohmann::json to_json(const RunConfig& c);

/// Replaces the DOE, MCMC, truth and validation seeds.
void override_seed(RunConfig& c, std::uint64_t seed);

}  // namespace pcapce::cli
