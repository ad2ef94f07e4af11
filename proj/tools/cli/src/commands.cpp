#include "pcapce_cli/commands.hpp"

#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>

#include "pcapce/csv.hpp"
#include "pcapce/error.hpp"
#include "pcapce/serialization.hpp"
#include "pcapce_cli/svg.hpp"

namespace pcapce::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string y_column(Eigen::Index i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "y_%03d", static_cast<int>(i));
  return buf;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << j.dump(1) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaInvalid, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << text;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

// Input columns of a CSV, in prior order.
Matrix input_columns(const CsvTable& t, const PriorSpec& prior) {
  Matrix X(t.values.rows(), static_cast<Eigen::Index>(prior.dimension()));
  for (std::size_t j = 0; j < prior.dimension(); ++j) {
    X.col(static_cast<Eigen::Index>(j)) = t.values.col(t.column(prior[j].name));
  }
  return X;
}

Matrix output_columns(const CsvTable& t, int n_nodes) {
  Matrix Y(t.values.rows(), n_nodes);
  for (int i = 0; i < n_nodes; ++i) Y.col(i) = t.values.col(t.column(y_column(i)));
  return Y;
}

void write_design(const fs::path& path, const Matrix& X, const PriorSpec& prior) {
  write_csv(path, prior.names(), X);
}

Matrix read_design(const fs::path& path, const PriorSpec& prior) {
  const CsvTable t = read_csv(path);
  if (t.header != prior.names()) {
    throw Error(ErrorCode::SchemaInvalid, path.string() + ": header does not match the prior names");
  }
  return t.values;
}

// Ensemble CSV: profile, load, inputs and stage displacement per row.
void write_profiles(const fs::path& path, const Matrix& Y, const Vector& loads, const Matrix& X,
                    const PriorSpec& prior, double v_G) {
  std::vector<std::string> header;
  for (Eigen::Index i = 0; i < Y.cols(); ++i) header.push_back(y_column(i));
  header.push_back("H_kN");
  for (const auto& n : prior.names()) header.push_back(n);
  header.push_back("v_G");
  Matrix all(Y.rows(), Y.cols() + 2 + X.cols());
  all << Y, loads, X, Vector::Constant(Y.rows(), v_G);
  write_csv(path, header, all);
}

struct Ensembles {
  Matrix X;
  std::vector<EnsembleResult> stages;
};

Ensembles simulate(const Matrix& X, const RunConfig& c) {
  Ensembles e{X, {}};
  for (const auto& s : c.stages) e.stages.push_back(run_ensemble(X, s.v_g_m, c.pile));
  return e;
}

// Design rows used for training and testing; holdout takes the test rows
// from one larger hypercube.
std::pair<Matrix, Matrix> make_designs(const RunConfig& c) {
  const std::size_t M = c.prior.dimension();
  if (c.validate.split == "holdout") {
    const std::size_t total = c.doe.K + c.validate.K_test;
    const Matrix all = scale_to_prior(latin_hypercube(total, M, c.doe.seed, c.doe.jitter), c.prior).rows;
    return {all.topRows(static_cast<Eigen::Index>(c.doe.K)),
            all.bottomRows(static_cast<Eigen::Index>(c.validate.K_test))};
  }
  return {scale_to_prior(latin_hypercube(c.doe.K, M, c.doe.seed, c.doe.jitter), c.prior).rows,
          scale_to_prior(latin_hypercube(c.validate.K_test, M, c.validate.seed, c.doe.jitter), c.prior).rows};
}

json named(const std::vector<std::string>& names, const Vector& v) {
  json j = json::object();
  for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = number_or_null(v[static_cast<Eigen::Index>(i)]);
  return j;
}

std::vector<std::string> augmented_names(const PriorSpec& prior) {
  auto names = prior.names();
  names.push_back("sigma2");
  return names;
}

Vector depths_of(const RunConfig& c) { return c.pile.depths(); }

void write_band(const fs::path& path, const Vector& depth, const PredictiveBand& b, const Vector* map_pred) {
  std::vector<std::string> header{"depth_m", "lo", "hi"};
  Matrix m(depth.size(), map_pred ? 4 : 3);
  m.col(0) = depth;
  m.col(1) = b.lo;
  m.col(2) = b.hi;
  if (map_pred) {
    header.push_back("map");
    m.col(3) = *map_pred;
  }
  write_csv(path, header, m);
}

// Table cell: numbers to four significant digits, arrays as "[lo, hi]".
std::string cell(const json& v) {
  if (v.is_number_float()) return fmt::format("{:.4g}", v.get<double>());
  if (v.is_array()) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + cell(v[i]);
    return out + "]";
  }
  if (v.is_null()) return "-";
  return v.dump();
}

const char* kStageColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

}  // namespace

Context make_context(RunConfig config, const fs::path& out_dir, bool quiet) {
  config.check();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + out_dir.string() + ": " + ec.message());
  Context ctx{std::move(config), RunPaths{out_dir}, nullptr};

  std::vector<spdlog::sink_ptr> sinks;
  auto file = std::make_shared<spdlog::sinks::basic_file_sink_mt>(ctx.paths.log().string(), false);
  file->set_pattern("[%Y-%m-%d %H:%M:%S.%e] [%l] %v");
  sinks.push_back(file);
  if (!quiet) {
    auto console = std::make_shared<spdlog::sinks::stderr_sink_mt>();
    console->set_pattern("%v");
    sinks.push_back(console);
  }
  ctx.log = std::make_shared<spdlog::logger>("pcapce", sinks.begin(), sinks.end());
  ctx.log->set_level(spdlog::level::info);
  ctx.log->flush_on(spdlog::level::info);

  write_json(ctx.paths.resolved_config(), to_json(ctx.config));
  return ctx;
}

int exit_code_for(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) return is_numerical(err->code()) ? 3 : 2;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return 2;
  return 3;
}

void cmd_doe(const Context& ctx) {
  const auto& c = ctx.config;
  const auto [train, test] = make_designs(c);
  write_design(ctx.paths.design(), train, c.prior);
  write_design(ctx.paths.test_design(), test, c.prior);
  ctx.log->info("doe: {} training rows -> {}", train.rows(), ctx.paths.design().string());
  ctx.log->info("doe: {} test rows ({}) -> {}", test.rows(), c.validate.split, ctx.paths.test_design().string());
}

void cmd_simulate(const Context& ctx) {
  const auto& c = ctx.config;
  const Matrix X = read_design(ctx.paths.design(), c.prior);
  const Matrix Xt = read_design(ctx.paths.test_design(), c.prior);
  for (std::size_t t = 0; t < c.stages.size(); ++t) {
    const double vg = c.stages[t].v_g_m;
    const std::size_t stage = t + 1;
    const EnsembleResult train = run_ensemble(X, vg, c.pile);
    write_profiles(ctx.paths.ensemble(stage), train.profiles, train.loads, X, c.prior, vg);
    const EnsembleResult test = run_ensemble(Xt, vg, c.pile);
    write_profiles(ctx.paths.test_ensemble(stage), test.profiles, test.loads, Xt, c.prior, vg);
    ctx.log->info("simulate: stage {} (v_G = {} m): {} training and {} test runs, H in [{:.1f}, {:.1f}] kN", stage,
                  vg, X.rows(), Xt.rows(), train.loads.minCoeff(), train.loads.maxCoeff());

    if (c.truth) {
      const Vector x = c.truth->x();
      const DeflectionProfile truth = solve_stage(SoilInputs::from(x), vg, c.pile);
      const Matrix xt = x.transpose();
      write_profiles(ctx.paths.truth(stage), truth.y.transpose(), Vector::Constant(1, truth.load), xt, c.prior, vg);
      Rng rng = make_rng(c.truth->seed, stage);
      std::normal_distribution<double> noise(0.0, 1.0);
      Vector obs = truth.y;
      for (Eigen::Index i = 0; i < obs.size(); ++i) obs[i] += c.truth->noise_sd_m * noise(rng);
      write_profiles(ctx.paths.observations(stage), obs.transpose(), Vector::Constant(1, truth.load), xt, c.prior,
                     vg);
      ctx.log->info("simulate: stage {} observations at the truth inputs (noise sd {} m)", stage,
                    c.truth->noise_sd_m);
    }
  }
}

void cmd_train(const Context& ctx) {
  const auto& c = ctx.config;
  json report;
  report["case"] = c.case_name;
  report["mode"] = std::string(to_string(c.surrogate.mode));
  report["epsilon_dr"] = c.surrogate.epsilon_dr;
  report["stages"] = json::array();
  for (std::size_t t = 0; t < c.stages.size(); ++t) {
    const std::size_t stage = t + 1;
    const CsvTable ens = read_csv(ctx.paths.ensemble(stage));
    const Matrix X = input_columns(ens, c.prior);
    const Matrix Y = output_columns(ens, c.pile.n_nodes);
    const PcaPceSurrogate s = train(X, Y, c.prior, c.surrogate);
    save(s, ctx.paths.surrogate(stage));

    const CsvTable test = read_csv(ctx.paths.test_ensemble(stage));
    const ValidationReport v = mape(s, input_columns(test, c.prior), output_columns(test, c.pile.n_nodes));

    json degrees = json::array(), loos = json::array();
    for (const auto& m : s.components) {
      degrees.push_back(m.degree());
      loos.push_back(number_or_null(m.loo_error));
    }
    json entry = {{"stage", stage},
                  {"v_G_m", c.stages[t].v_g_m},
                  {"training_K", s.meta.training_K},
                  {"n_components", s.components.size()},
                  {"n_retained", s.basis ? json(s.basis->retained) : json(nullptr)},
                  {"explained_variance", number_or_null(s.meta.explained_variance)},
                  {"pca_error", number_or_null(s.meta.pca_error)},
                  {"surrogate_error", number_or_null(s.meta.surrogate_error)},
                  {"component_degrees", degrees},
                  {"component_loo_errors", loos},
                  {"n_test", v.n_test},
                  {"mape_percent", number_or_null(v.mape)},
                  {"per_point_mape_percent", to_std(v.per_point_mape)}};
    report["stages"].push_back(entry);
    if (s.basis) {
      ctx.log->info("train: stage {}: N' = {} (explained {:.6f}), PCA error {:.3e}, surrogate error {:.3e}, MAPE {:.3f}%",
                    stage, s.basis->retained, s.meta.explained_variance, s.meta.pca_error,
                    s.meta.surrogate_error, v.mape);
    } else {
      ctx.log->info("train: stage {}: {} pointwise models, surrogate error {:.3e}, MAPE {:.3f}%", stage,
                    s.components.size(), s.meta.surrogate_error, v.mape);
    }
  }
  write_json(ctx.paths.validation(), report);
}

std::vector<SweepRow> mape_sweep(const RunConfig& c, spdlog::logger* log) {
  std::vector<SweepRow> rows;
  const std::size_t M = c.prior.dimension();
  for (std::uint64_t seed : c.validate.sweep_seeds) {
    const Matrix Xt =
        scale_to_prior(latin_hypercube(c.validate.K_test, M, derive_seed(seed, 0x7e57), c.doe.jitter), c.prior).rows;
    const Ensembles test = simulate(Xt, c);
    for (std::size_t K : c.validate.sweep_K) {
      const Matrix X = scale_to_prior(latin_hypercube(K, M, derive_seed(seed, K), c.doe.jitter), c.prior).rows;
      const Ensembles train_set = simulate(X, c);
      for (std::size_t t = 0; t < c.stages.size(); ++t) {
        for (SurrogateMode mode : {SurrogateMode::PcaPce, SurrogateMode::PointwisePce}) {
          SurrogateConfig sc = c.surrogate;
          sc.mode = mode;
          SweepRow row{seed, K, t + 1, mode, kNaN, -1};
          try {
            const PcaPceSurrogate s = train(X, train_set.stages[t].profiles, c.prior, sc);
            row.mape = mape(s, Xt, test.stages[t].profiles).mape;
            if (s.basis) row.n_retained = s.basis->retained;
          } catch (const Error& e) {
            if (log) log->warn("validate: seed {} K {} stage {} {}: {}", seed, K, t + 1, to_string(mode), e.what());
          }
          rows.push_back(row);
        }
      }
    }
    if (log) log->info("validate: seed {} done", seed);
  }
  return rows;
}

double sweep_median(const std::vector<SweepRow>& rows, std::size_t K, std::size_t stage, SurrogateMode mode) {
  std::vector<double> v;
  for (const auto& r : rows) {
    if (r.K == K && r.stage == stage && r.mode == mode && std::isfinite(r.mape)) v.push_back(r.mape);
  }
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void cmd_validate(const Context& ctx) {
  const auto& c = ctx.config;
  const auto rows = mape_sweep(c, ctx.log.get());
  std::string sweep = "seed,K,stage,mode,mape_percent,n_retained\n";
  for (const auto& r : rows) {
    sweep += std::to_string(r.seed) + "," + std::to_string(r.K) + "," + std::to_string(r.stage) + "," +
             std::string(to_string(r.mode)) + "," + format_number(r.mape) + "," + std::to_string(r.n_retained) + "\n";
  }
  write_text(ctx.paths.mape_sweep(), sweep);

  std::string curve = "K,stage,mode,median_mape_percent\n";
  for (std::size_t K : c.validate.sweep_K) {
    for (std::size_t t = 1; t <= c.stages.size(); ++t) {
      for (SurrogateMode mode : {SurrogateMode::PcaPce, SurrogateMode::PointwisePce}) {
        curve += std::to_string(K) + "," + std::to_string(t) + "," + std::string(to_string(mode)) + "," +
                 format_number(sweep_median(rows, K, t, mode)) + "\n";
      }
    }
  }
  write_text(ctx.paths.mape_curve(), curve);
  ctx.log->info("validate: {} sweep points -> {}", rows.size(), ctx.paths.mape_curve().string());
}

void cmd_invert(const Context& ctx) {
  const auto& c = ctx.config;
  const std::size_t S = c.stages.size();
  std::vector<StageData> data;
  for (std::size_t t = 0; t < S; ++t) {
    const std::size_t stage = t + 1;
    auto s = std::make_shared<const PcaPceSurrogate>(load(ctx.paths.surrogate(stage)));
    if (s->n_output() != c.pile.n_nodes) {
      throw Error(ErrorCode::DimensionMismatch, "surrogate for stage " + std::to_string(stage) +
                                                    " does not match the pile node count");
    }
    const CsvTable obs = read_csv(ctx.paths.observations(stage));
    ObservationSet o;
    o.vectors = output_columns(obs, c.pile.n_nodes);
    o.stage_id = static_cast<int>(stage);
    o.v_G = c.stages[t].v_g_m;
    data.push_back({std::move(s), std::move(o)});
  }

  const SequenceResult seq = run_sequence(data, c.prior, c.mcmc);
  const Vector depth = depths_of(c);
  const auto names = augmented_names(c.prior);
  const auto M = static_cast<Eigen::Index>(c.prior.dimension());

  for (std::size_t j = 0; j < S; ++j) write_band(ctx.paths.band(0, j + 1), depth, seq.prior_predictive[j], nullptr);

  for (std::size_t t = 0; t < S; ++t) {
    const std::size_t stage = t + 1;
    const StagePosterior& p = seq.stages[t];
    const ChainEnsemble& ch = *p.chains;

    std::vector<std::string> header{"step", "walker"};
    for (const auto& n : names) header.push_back(n);
    header.push_back("log_post");
    const std::size_t kept_steps = (ch.steps() + c.chain_thin - 1) / c.chain_thin;
    Matrix rows(static_cast<Eigen::Index>(kept_steps * ch.walkers()), static_cast<Eigen::Index>(header.size()));
    Eigen::Index r = 0;
    for (std::size_t s = 0; s < ch.steps(); s += c.chain_thin) {
      for (std::size_t w = 0; w < ch.walkers(); ++w, ++r) {
        rows(r, 0) = static_cast<double>(s);
        rows(r, 1) = static_cast<double>(w);
        rows.row(r).segment(2, ch.dim()) = ch.position(s, w).transpose();
        rows(r, rows.cols() - 1) = ch.log_post(s, w);
      }
    }
    write_csv(ctx.paths.chains(stage), header, rows.topRows(r));

    json credible = json::object();
    for (Eigen::Index k = 0; k < p.post_samples.cols(); ++k) {
      std::vector<double> col(p.post_samples.col(k).data(), p.post_samples.col(k).data() + p.post_samples.rows());
      std::sort(col.begin(), col.end());
      const double lvl = c.mcmc.predictive_level;
      credible[names[static_cast<std::size_t>(k)]] = {sorted_quantile(col, 0.5 * (1 - lvl)),
                                                       sorted_quantile(col, 0.5 * (1 + lvl))};
    }
    Vector map_full(M + 1);
    map_full << p.x_map.x_m, p.x_map.sigma2;
    const Vector map_pred = data[t].surrogate->predict(p.x_map.x_m);
    json degenerate = json::array();
    for (bool d : p.kde->degenerate_dims()) degenerate.push_back(d);

    json summary = {{"case", c.case_name},
                    {"stage", stage},
                    {"v_G_m", c.stages[t].v_g_m},
                    {"seed", p.seed},
                    {"walkers", ch.walkers()},
                    {"steps", ch.steps()},
                    {"burn_in", c.mcmc.burn_in},
                    {"n_retained_samples", p.post_samples.rows()},
                    {"acceptance_rate", p.acceptance_rate},
                    {"autocorr_times", named(names, p.autocorr_times)},
                    {"short_chain", p.short_chain},
                    {"sigma2_prior_max", p.sigma2_max},
                    {"map", named(names, map_full)},
                    {"mean", named(names, p.mean)},
                    {"std", named(names, p.stddev)},
                    {"credible_interval", credible},
                    {"kde", {{"n_points", p.kde->points().rows()},
                             {"bandwidths", named(c.prior.names(), p.kde->bandwidths())},
                             {"degenerate", degenerate}}},
                    {"predictive", {{"level", c.mcmc.predictive_level},
                                    {"lo", to_std(p.predictive.lo)},
                                    {"hi", to_std(p.predictive.hi)},
                                    {"map", to_std(map_pred)}}}};
    write_json(ctx.paths.summary(stage), summary);

    for (std::size_t j = 0; j < S; ++j) {
      const Vector mp = data[j].surrogate->predict(p.x_map.x_m);
      write_band(ctx.paths.band(stage, j + 1), depth, seq.cross[t][j], &mp);
    }
    ctx.log->info("invert: stage {}: acceptance {:.3f}, MAP G0 = {:.1f}, K0 = {:.4f}, OCR = {:.3f}, sigma2 = {:.3e}",
                  stage, p.acceptance_rate, p.x_map.x_m[0], p.x_map.x_m[1], p.x_map.x_m[2], p.x_map.sigma2);
    if (p.short_chain) {
      ctx.log->warn("invert: stage {}: chain shorter than 50 autocorrelation times (max tau {:.1f})", stage,
                    p.autocorr_times.maxCoeff());
    }
    if (p.kde->any_degenerate()) ctx.log->warn("invert: stage {}: posterior KDE used the narrow fallback kernel", stage);
  }
}

void cmd_report(const Context& ctx) {
  const auto& c = ctx.config;
  const std::size_t S = c.stages.size();
  const fs::path dir = ctx.paths.report_dir();
  fs::create_directories(dir);
  json figures = json::array(), gaps = json::array();

  for (std::size_t t = 0; t <= S; ++t) {
    std::vector<std::string> missing;
    for (std::size_t j = 1; j <= S; ++j) {
      if (!fs::exists(ctx.paths.band(t, j))) missing.push_back(ctx.paths.band(t, j).filename().string());
    }
    const std::string name = "band_t" + std::to_string(t) + ".svg";
    if (!missing.empty()) {
      for (const auto& m : missing) gaps.push_back(name + ": missing " + m);
      continue;
    }
    SvgPlot plot(c.case_name + ": " + (t == 0 ? std::string("prior predictive (t0)")
                                              : "posterior predictive after stage " + std::to_string(t) +
                                                    " (t" + std::to_string(t) + ")"),
                 "deflection (m)", "depth (m)");
    plot.invert_y();
    for (std::size_t j = 1; j <= S; ++j) {
      const CsvTable b = read_csv(ctx.paths.band(t, j));
      const auto depth = to_std(b.values.col(b.column("depth_m")));
      const std::string color = kStageColors[(j - 1) % 5];
      const std::string tag = "v_G " + format_number(c.stages[j - 1].v_g_m) + " m";
      plot.band_x(depth, to_std(b.values.col(b.column("lo"))), to_std(b.values.col(b.column("hi"))), color,
                  format_number(100 * c.mcmc.predictive_level) + "% band, " + tag);
      if (t > 0) plot.line(depth, to_std(b.values.col(b.column("map"))), color, "MAP, " + tag, true);
      if (fs::exists(ctx.paths.observations(j))) {
        const CsvTable o = read_csv(ctx.paths.observations(j));
        plot.markers(to_std(output_columns(o, c.pile.n_nodes).row(0).transpose()), depth, color,
                     "observed, " + tag);
      }
    }
    plot.save(dir / name);
    figures.push_back(name);
  }

  if (fs::exists(ctx.paths.mape_curve())) {
    std::ifstream in(ctx.paths.mape_curve());
    std::string line;
    std::getline(in, line);
    std::map<std::pair<std::size_t, std::string>, std::pair<std::vector<double>, std::vector<double>>> curves;
    while (std::getline(in, line)) {
      std::size_t K = 0, stage = 0;
      char mode[32] = {0};
      double m = kNaN;
      char rest[64] = {0};
      if (std::sscanf(line.c_str(), "%zu,%zu,%31[^,],%63s", &K, &stage, mode, rest) == 4) {
        m = std::strtod(rest, nullptr);
        auto& cv = curves[{stage, mode}];
        cv.first.push_back(static_cast<double>(K));
        cv.second.push_back(m);
      }
    }
    SvgPlot plot(c.case_name + ": training size against MAPE", "training runs K", "median MAPE (%)");
    for (const auto& [key, cv] : curves) {
      const std::string color = kStageColors[(key.first - 1) % 5];
      const bool pointwise = key.second == "pointwise-pce";
      const std::string label = "stage " + std::to_string(key.first) + ", " + key.second;
      plot.line(cv.first, cv.second, color, label, pointwise);
      plot.markers(cv.first, cv.second, color, "");
    }
    plot.save(dir / "mape_curve.svg");
    figures.push_back("mape_curve.svg");
  } else {
    gaps.push_back("mape_curve.svg: missing " + ctx.paths.mape_curve().filename().string());
  }

  std::string md = "# Report: " + c.case_name + "\n\n";
  if (fs::exists(ctx.paths.validation())) {
    const json v = read_json(ctx.paths.validation());
    md += "## Surrogate validation (" + v.value("mode", std::string("?")) + ")\n\n";
    md += "| stage | v_G (m) | K | components | N' | MAPE (%) |\n|---|---|---|---|---|---|\n";
    for (const auto& s : v["stages"]) {
      md += "| " + cell(s["stage"]) + " | " + cell(s["v_G_m"]) + " | " + cell(s["training_K"]) + " | " +
            cell(s["n_components"]) + " | " + cell(s["n_retained"]) + " | " + cell(s["mape_percent"]) + " |\n";
    }
    md += "\n";
  } else {
    gaps.push_back("validation table: missing " + ctx.paths.validation().filename().string());
  }
  bool have_summaries = true;
  for (std::size_t t = 1; t <= S; ++t) have_summaries = have_summaries && fs::exists(ctx.paths.summary(t));
  if (have_summaries) {
    md += "## Posterior summaries\n\n| stage | parameter | MAP | mean | std | credible interval |\n|---|---|---|---|---|---|\n";
    for (std::size_t t = 1; t <= S; ++t) {
      const json s = read_json(ctx.paths.summary(t));
      for (const auto& n : augmented_names(c.prior)) {
        md += "| " + std::to_string(t) + " | " + n + " | " + cell(s["map"][n]) + " | " + cell(s["mean"][n]) +
              " | " + cell(s["std"][n]) + " | " + cell(s["credible_interval"][n]) + " |\n";
      }
    }
    md += "\n";
  } else {
    gaps.push_back("posterior summaries: missing summary_stage*.json");
  }
  md += "## Figures\n\n";
  for (const auto& f : figures) md += "- " + f.get<std::string>() + "\n";
  if (!gaps.empty()) {
    md += "\n## Gaps\n\n";
    for (const auto& g : gaps) md += "- " + g.get<std::string>() + "\n";
  }
  write_text(dir / "report.md", md);
  write_json(dir / "report.json", {{"case", c.case_name}, {"figures", figures}, {"gaps", gaps}});
  ctx.log->info("report: {} figures, {} gaps -> {}", figures.size(), gaps.size(), dir.string());
}

}  // namespace pcapce::cli
