#include <benchmark/benchmark.h>

#include "pcapce/doe.hpp"
#include "pcapce/forward.hpp"
#include "pcapce/inference.hpp"
#include "pcapce/pca.hpp"
#include "pcapce/pce.hpp"
#include "pcapce/surrogate.hpp"

using namespace pcapce;

namespace {

const PriorSpec& prior() {
  static const PriorSpec p = pile_soil_prior();
  return p;
}

Matrix design(std::size_t K) { return scale_to_prior(latin_hypercube(K, 3, 2024), prior()).rows; }

const Matrix& ensemble14() {
  static const Matrix Y = run_ensemble(design(14), 0.02, PileConfig{}).profiles;
  return Y;
}

void BM_SolveStage(benchmark::State& state) {
  const PileConfig cfg;
  const SoilInputs soil{110000.0, 1.5, 30.0};
  const double vg = state.range(0) / 100.0;
  for (auto _ : state) benchmark::DoNotOptimize(solve_stage(soil, vg, cfg));
}
BENCHMARK(BM_SolveStage)->Arg(2)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_SolveLinear(benchmark::State& state) {
  PileConfig cfg;
  cfg.n_nodes = static_cast<int>(state.range(0));
  const Vector k = subgrade_profile({110000.0, 1.5, 30.0}, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(solve_linear(k, 500.0, cfg));
}
BENCHMARK(BM_SolveLinear)->Arg(101)->Arg(201)->Arg(401);

void BM_FitPca(benchmark::State& state) {
  const Matrix& Y = ensemble14();
  for (auto _ : state) benchmark::DoNotOptimize(fit_pca(Y));
}
BENCHMARK(BM_FitPca);

void BM_AdaptDegree(benchmark::State& state) {
  const auto K = static_cast<std::size_t>(state.range(0));
  const Matrix X = design(K);
  Vector z(X.rows());
  for (Eigen::Index k = 0; k < X.rows(); ++k) z[k] = std::sqrt(X(k, 0)) * X(k, 1) / std::pow(X(k, 2), 0.25);
  const PceConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(adapt_degree(X, z, prior(), cfg));
}
BENCHMARK(BM_AdaptDegree)->Arg(14)->Arg(60);

void BM_Train(benchmark::State& state) {
  const Matrix X = design(14);
  SurrogateConfig cfg;
  cfg.mode = state.range(0) == 0 ? SurrogateMode::PcaPce : SurrogateMode::PointwisePce;
  for (auto _ : state) benchmark::DoNotOptimize(train(X, ensemble14(), prior(), cfg));
}
BENCHMARK(BM_Train)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
  SurrogateConfig cfg;
  cfg.mode = state.range(0) == 0 ? SurrogateMode::PcaPce : SurrogateMode::PointwisePce;
  const PcaPceSurrogate s = train(design(14), ensemble14(), prior(), cfg);
  const Vector x{{110000.0, 1.5, 30.0}};
  for (auto _ : state) benchmark::DoNotOptimize(s.predict(x));
}
BENCHMARK(BM_Predict)->Arg(0)->Arg(1);

void BM_AiesGaussian(benchmark::State& state) {
  const LogDensity logp = [](const Eigen::Ref<const Vector>& x) { return -0.5 * x.squaredNorm(); };
  const Matrix init = Matrix::Random(32, 3);
  for (auto _ : state) benchmark::DoNotOptimize(aies_sample(logp, init, 1000, 2.0, 1));
  state.SetItemsProcessed(state.iterations() * 32 * 1000);
}
BENCHMARK(BM_AiesGaussian)->Unit(benchmark::kMillisecond);

void BM_RunStage(benchmark::State& state) {
  const PcaPceSurrogate s = train(design(14), ensemble14(), prior(), SurrogateConfig{});
  ObservationSet obs;
  obs.vectors = s.predict(Vector{{110000.0, 1.5, 30.0}}).transpose();
  obs.stage_id = 1;
  McmcConfig cfg;
  cfg.walkers = 30;
  cfg.steps = 2000;
  for (auto _ : state) benchmark::DoNotOptimize(run_stage(s, obs, PriorDensity(prior()), prior(), cfg));
}
BENCHMARK(BM_RunStage)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
