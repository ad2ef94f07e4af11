#include "pcapce_cli/config.hpp"

#include <set>

#include "pcapce/error.hpp"
#include "pcapce/serialization.hpp"
#include "pcapce_cli/toml.hpp"

namespace pcapce::cli {
namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); }

// Reads keys from one table and rejects any it does not know.
class Table {
 public:
  Table(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) invalid("[" + name_ + "] must be a table");
  }
  ~Table() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) invalid("unknown key '" + k + "' in [" + name_ + "]");
    }
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      const json& v = j_.at(key);
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw std::invalid_argument("number expected");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer()) throw std::invalid_argument("integer expected");
        if (std::is_unsigned_v<T> && v.get<long long>() < 0) throw std::invalid_argument("must be >= 0");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("boolean expected");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw std::invalid_argument("string expected");
      }
      out = v.get<T>();
    } catch (const std::exception& e) {
      invalid("[" + name_ + "] " + key + ": " + e.what());
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

PriorSpec prior_from(const json& arr) {
  if (!arr.is_array() || arr.empty()) invalid("[[prior]] needs at least one entry");
  std::vector<PriorEntry> entries;
  for (const auto& e : arr) {
    Table t(e, "prior");
    std::string name, dist = "uniform";
    double lo = 0.0, hi = 0.0;
    t.get("name", name);
    t.get("distribution", dist);
    t.get("lo", lo);
    t.get("hi", hi);
    if (name.empty()) invalid("prior entry without a name");
    if (dist != "uniform") invalid("prior '" + name + "': only uniform distributions are supported");
    entries.push_back({name, Uniform{lo, hi}});
  }
  try {
    return PriorSpec(std::move(entries));
  } catch (const Error& e) {
    invalid(e.what());
  }
}

}  // namespace

void RunConfig::check() const {
  if (stages.empty()) invalid("at least one [[stages]] entry is required");
  for (const auto& s : stages) {
    if (!(s.v_g_m > 0.0)) invalid("stage v_g_m must be positive");
  }
  if (doe.K < 1) invalid("doe.K must be at least 1");
  if (prior.dimension() != 3) invalid("the pile model takes exactly three inputs (G0, K0, OCR)");
  try {
    pile.validate();
  } catch (const Error& e) {
    invalid(e.what());
  }
  if (!(surrogate.epsilon_dr > 0.0 && surrogate.epsilon_dr < 1.0)) invalid("surrogate.epsilon_dr in (0, 1)");
  if (surrogate.pce.degrees.empty()) invalid("surrogate.degrees must not be empty");
  for (int p : surrogate.pce.degrees) {
    if (p < 0) invalid("surrogate.degrees must be nonnegative");
  }
  if (!(surrogate.pce.q_norm > 0.0 && surrogate.pce.q_norm <= 1.0)) invalid("surrogate.q_norm in (0, 1]");
  try {
    mcmc.validate(prior.dimension());
  } catch (const Error& e) {
    invalid(e.what());
  }
  if (chain_thin < 1) invalid("mcmc.chain_thin must be at least 1");
  if (validate.K_test < 1) invalid("validate.K_test must be at least 1");
  if (validate.split != "fresh-lhs" && validate.split != "holdout") {
    invalid("validate.split must be 'fresh-lhs' or 'holdout'");
  }
  for (std::size_t K : validate.sweep_K) {
    if (K < 3) invalid("validate.sweep_K entries must be at least 3");
  }
  if (truth) {
    if (!prior.contains(truth->x())) invalid("truth parameters lie outside the prior support");
    if (!(truth->noise_sd_m >= 0.0)) invalid("truth.noise_sd_m must be nonnegative");
  }
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  Table root(j, "root");
  root.get("case", c.case_name);
  if (root.has("prior")) c.prior = prior_from(root.raw("prior"));

  if (root.has("pile")) {
    Table t(root.raw("pile"), "pile");
    t.get("diameter_m", c.pile.diameter);
    t.get("embedded_length_m", c.pile.embedded_length);
    t.get("wall_thickness_m", c.pile.wall_thickness);
    t.get("youngs_modulus_kpa", c.pile.youngs_modulus);
    t.get("load_height_m", c.pile.load_height);
    t.get("n_nodes", c.pile.n_nodes);
    t.get("subgrade_constant", c.pile.subgrade_constant);
    t.get("degradation", c.pile.degradation);
    t.get("stage_tolerance_m", c.pile.stage_tolerance);
    t.get("max_picard_iterations", c.pile.max_picard_iterations);
    t.get("picard_tolerance_m", c.pile.picard_tolerance);
  }

  if (root.has("stages")) {
    const json& arr = root.raw("stages");
    if (!arr.is_array()) invalid("stages must be an array of tables");
    c.stages.clear();
    for (const auto& s : arr) {
      Table t(s, "stages");
      StageConfig sc;
      t.get("v_g_m", sc.v_g_m);
      c.stages.push_back(sc);
    }
  }

  if (root.has("doe")) {
    Table t(root.raw("doe"), "doe");
    t.get("K", c.doe.K);
    t.get("seed", c.doe.seed);
    t.get("jitter", c.doe.jitter);
  }

  if (root.has("surrogate")) {
    Table t(root.raw("surrogate"), "surrogate");
    std::string mode(to_string(c.surrogate.mode));
    t.get("mode", mode);
    try {
      c.surrogate.mode = surrogate_mode_from_string(mode);
    } catch (const Error& e) {
      invalid(e.what());
    }
    t.get("epsilon_dr", c.surrogate.epsilon_dr);
    t.get("degrees", c.surrogate.pce.degrees);
    t.get("q_norm", c.surrogate.pce.q_norm);
    t.get("max_terms", c.surrogate.pce.max_terms);
  }

  if (root.has("mcmc")) {
    Table t(root.raw("mcmc"), "mcmc");
    t.get("walkers", c.mcmc.walkers);
    t.get("steps", c.mcmc.steps);
    t.get("burn_in", c.mcmc.burn_in);
    t.get("stretch_a", c.mcmc.stretch_a);
    t.get("seed", c.mcmc.seed);
    t.get("predictive_level", c.mcmc.predictive_level);
    t.get("predictive_cap", c.mcmc.predictive_cap);
    t.get("kde_max_points", c.mcmc.kde_max_points);
    t.get("chain_thin", c.chain_thin);
  }

  if (root.has("truth") && !root.raw("truth").is_null()) {
    Table t(root.raw("truth"), "truth");
    TruthConfig tc;
    for (const char* k : {"G0", "K0", "OCR"}) {
      if (!t.has(k)) invalid(std::string("truth.") + k + " is required");
    }
    t.get("G0", tc.G0);
    t.get("K0", tc.K0);
    t.get("OCR", tc.OCR);
    t.get("noise_sd_m", tc.noise_sd_m);
    t.get("seed", tc.seed);
    c.truth = tc;
  }

  if (root.has("validate")) {
    Table t(root.raw("validate"), "validate");
    t.get("K_test", c.validate.K_test);
    t.get("split", c.validate.split);
    t.get("seed", c.validate.seed);
    t.get("sweep_K", c.validate.sweep_K);
    t.get("sweep_seeds", c.validate.sweep_seeds);
  }

  c.check();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  return config_from_json(parse_toml_file(path.string()));
}

json to_json(const RunConfig& c) {
  json j;
  j["case"] = c.case_name;
  json prior = json::array();
  for (const auto& e : c.prior.entries()) {
    const auto& u = std::get<Uniform>(e.distribution);
    prior.push_back({{"name", e.name}, {"distribution", "uniform"}, {"lo", u.lo}, {"hi", u.hi}});
  }
  j["prior"] = prior;
  j["pile"] = {{"diameter_m", c.pile.diameter},
               {"embedded_length_m", c.pile.embedded_length},
               {"wall_thickness_m", c.pile.wall_thickness},
               {"youngs_modulus_kpa", c.pile.youngs_modulus},
               {"load_height_m", c.pile.load_height},
               {"n_nodes", c.pile.n_nodes},
               {"subgrade_constant", c.pile.subgrade_constant},
               {"degradation", c.pile.degradation},
               {"stage_tolerance_m", c.pile.stage_tolerance},
               {"max_picard_iterations", c.pile.max_picard_iterations},
               {"picard_tolerance_m", c.pile.picard_tolerance}};
  json stages = json::array();
  for (const auto& s : c.stages) stages.push_back({{"v_g_m", s.v_g_m}});
  j["stages"] = stages;
  j["doe"] = {{"K", c.doe.K}, {"seed", c.doe.seed}, {"jitter", c.doe.jitter}};
  j["surrogate"] = {{"mode", std::string(to_string(c.surrogate.mode))},
                    {"epsilon_dr", c.surrogate.epsilon_dr},
                    {"degrees", c.surrogate.pce.degrees},
                    {"q_norm", c.surrogate.pce.q_norm},
                    {"max_terms", c.surrogate.pce.max_terms}};
  j["mcmc"] = {{"walkers", c.mcmc.walkers},
               {"steps", c.mcmc.steps},
               {"burn_in", c.mcmc.burn_in},
               {"stretch_a", c.mcmc.stretch_a},
               {"seed", c.mcmc.seed},
               {"predictive_level", c.mcmc.predictive_level},
               {"predictive_cap", c.mcmc.predictive_cap},
               {"kde_max_points", c.mcmc.kde_max_points},
               {"chain_thin", c.chain_thin}};
  if (c.truth) {
    j["truth"] = {{"G0", c.truth->G0},
                  {"K0", c.truth->K0},
                  {"OCR", c.truth->OCR},
                  {"noise_sd_m", c.truth->noise_sd_m},
                  {"seed", c.truth->seed}};
  } else {
    j["truth"] = nullptr;
  }
  j["validate"] = {{"K_test", c.validate.K_test},
                   {"split", c.validate.split},
                   {"seed", c.validate.seed},
                   {"sweep_K", c.validate.sweep_K},
                   {"sweep_seeds", c.validate.sweep_seeds}};
  return j;
}

void override_seed(RunConfig& c, std::uint64_t seed) {
  c.doe.seed = seed;
  c.mcmc.seed = seed;
  c.validate.seed = derive_seed(seed, 0x7e57);
  if (c.truth) c.truth->seed = derive_seed(seed, 0x7207);
}

}  // namespace pcapce::cli
