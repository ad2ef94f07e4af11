#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "pcapce/doe.hpp"
#include "pcapce/random.hpp"
#include "pcapce/surrogate.hpp"
#include "pcapce/types.hpp"

namespace pcapce {

/// Forward-model parameters plus the residual variance of the Gaussian
/// observation model (covariance sigma2 * I).
struct AugmentedPoint {
  Vector x_m;
  double sigma2 = 0.0;
};

struct ObservationSet {
  Matrix vectors;  // m x N, one observed profile per row
  int stage_id = 0;
  double v_G = 0.0;
};

/// Density over the forward-model parameters, used as the stage prior.
class ParameterDensity {
 public:
  virtual ~ParameterDensity() = default;
  virtual std::size_t dimension() const = 0;
  virtual double logpdf(const Eigen::Ref<const Vector>& x) const = 0;
  /// n independent draws, one per row.
  virtual Matrix sample(std::size_t n, std::uint64_t seed) const = 0;
};

class PriorDensity final : public ParameterDensity {
 public:
  explicit PriorDensity(PriorSpec prior) : prior_(std::move(prior)) {}
  std::size_t dimension() const override { return prior_.dimension(); }
  double logpdf(const Eigen::Ref<const Vector>& x) const override;
  Matrix sample(std::size_t n, std::uint64_t seed) const override;
  const PriorSpec& spec() const { return prior_; }

 private:
  PriorSpec prior_;
};

/// Product-Gaussian kernel density estimate, each kernel truncated to the
/// support box and renormalised so the estimate integrates to one.
class KernelDensity final : public ParameterDensity {
 public:
  KernelDensity(Matrix points, Vector bandwidths, PriorSpec support,
                std::vector<bool> degenerate_dims);

  std::size_t dimension() const override { return support_.dimension(); }
  double logpdf(const Eigen::Ref<const Vector>& x) const override;
  Matrix sample(std::size_t n, std::uint64_t seed) const override;

  const Matrix& points() const { return points_; }
  const Vector& bandwidths() const { return bandwidths_; }
  const PriorSpec& support() const { return support_; }
  /// Dimensions whose samples had zero spread and got the narrow fallback kernel.
  const std::vector<bool>& degenerate_dims() const { return degenerate_; }
  bool any_degenerate() const;

 private:
  Matrix points_;
  Vector bandwidths_;
  PriorSpec support_;
  std::vector<bool> degenerate_;
  Matrix log_norm_;  // per kernel and dimension: log(h sqrt(2 pi) * truncated mass)
};

/// Silverman bandwidth 1.06 sd n^(-1/5) per dimension. When `max_points` is
/// nonzero and smaller than n, an evenly strided subset of rows is used.
KernelDensity kde_fit(const Matrix& samples, const PriorSpec& bounds, std::size_t max_points = 0);

/// Sum over observed profiles of the isotropic Gaussian log density; -inf when
/// x_m is outside the surrogate's input support.
double log_likelihood(const PcaPceSurrogate& surrogate, const ObservationSet& obs,
                      const AugmentedPoint& p);

/// Upper bound of the uniform residual-variance prior: the largest observed value.
double sigma2_prior_max(const ObservationSet& obs);

double log_posterior(const ParameterDensity& prior, double sigma2_max,
                     const PcaPceSurrogate& surrogate, const ObservationSet& obs,
                     const AugmentedPoint& p);
double log_posterior(const PriorSpec& prior, double sigma2_max, const PcaPceSurrogate& surrogate,
                     const ObservationSet& obs, const AugmentedPoint& p);

using LogDensity = std::function<double(const Eigen::Ref<const Vector>&)>;

/// Walker positions of an ensemble run, stored step-major.
class ChainEnsemble {
 public:
  ChainEnsemble(std::size_t steps, std::size_t walkers, std::size_t dim, std::uint64_t seed);

  std::size_t steps() const { return steps_; }
  std::size_t walkers() const { return walkers_; }
  std::size_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }

  auto position(std::size_t step, std::size_t walker) {
    return Eigen::Map<Vector>(samples_.data() + (step * walkers_ + walker) * dim_,
                              static_cast<Eigen::Index>(dim_));
  }
  auto position(std::size_t step, std::size_t walker) const {
    return Eigen::Map<const Vector>(samples_.data() + (step * walkers_ + walker) * dim_,
                                    static_cast<Eigen::Index>(dim_));
  }
  double& log_post(std::size_t step, std::size_t walker) {
    return log_posts_[step * walkers_ + walker];
  }
  double log_post(std::size_t step, std::size_t walker) const {
    return log_posts_[step * walkers_ + walker];
  }

  std::size_t accepted = 0;
  std::size_t proposed = 0;
  double acceptance_rate() const {
    return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed);
  }

 private:
  std::size_t steps_;
  std::size_t walkers_;
  std::size_t dim_;
  std::uint64_t seed_;
  std::vector<double> samples_;
  std::vector<double> log_posts_;
};

/// Stretch factor with density proportional to 1/sqrt(z) on [1/a, a].
double draw_stretch(Rng& rng, double a);

/// Affine-invariant ensemble sampler with the stretch move. The walkers are
/// split into two halves that are updated alternately, each using only the
/// other half as the complementary ensemble. `init` is walkers x dim.
ChainEnsemble aies_sample(const LogDensity& logpost, const Matrix& init, std::size_t n_steps,
                          double stretch_a, std::uint64_t seed);

struct RetainedSamples {
  Matrix samples;    // n x dim, step-major
  Vector log_posts;  // n
};

/// Drops the first ceil(fraction * steps) steps and flattens the rest.
RetainedSamples burn_in(const ChainEnsemble& chains, double fraction);

/// Sample with the largest log posterior (earliest on ties). The last
/// column of `samples` is the residual variance.
AugmentedPoint map_estimate(const Matrix& samples, const Vector& log_posts);

/// Integrated autocorrelation time of each parameter over the steps from
/// `first_step` on, using the walker-averaged autocorrelation function and an
/// automatic window of five times the running estimate.
Vector autocorrelation_times(const ChainEnsemble& chains, std::size_t first_step = 0);

struct PredictiveBand {
  Vector lo;
  Vector hi;
};

/// Empirical central interval of surrogate predictions. `param_samples` is
/// n x M for a noise-free push-forward, or n x (M+1) with the residual
/// variance last, in which case Gaussian noise of that variance is added to
/// every output before taking quantiles.
PredictiveBand predictive_interval(const PcaPceSurrogate& surrogate, const Matrix& param_samples,
                                   double level, std::size_t sample_cap,
                                   std::uint64_t noise_seed = 0);

/// Type-7 (linear interpolation) empirical quantile of a sorted range.
double sorted_quantile(const std::vector<double>& sorted, double p);

struct McmcConfig {
  std::size_t walkers = 30;
  std::size_t steps = 20000;
  double burn_in = 0.70;
  double stretch_a = 2.0;
  std::uint64_t seed = 1;
  double predictive_level = 0.99;
  std::size_t predictive_cap = 4000;
  std::size_t kde_max_points = 2000;
  std::optional<double> sigma2_fixed;  // pins the residual variance instead of sampling it

  void validate(std::size_t n_params) const;
};

struct StagePosterior {
  int stage_id = 0;
  Matrix post_samples;  // n x (M+1), residual variance last
  Vector post_log_posts;
  AugmentedPoint x_map;
  Vector mean;    // M+1
  Vector stddev;  // M+1
  PredictiveBand predictive;
  std::shared_ptr<const KernelDensity> kde;
  double acceptance_rate = 0.0;
  Vector autocorr_times;
  bool short_chain = false;  // chain shorter than 50 autocorrelation times
  double sigma2_max = 0.0;
  std::uint64_t seed = 0;
  std::shared_ptr<const ChainEnsemble> chains;
};

/// One Bayesian update: ensemble MCMC on (x_m, sigma2) with the given
/// parameter prior and a fresh uniform residual-variance prior.
StagePosterior run_stage(const PcaPceSurrogate& surrogate, const ObservationSet& obs,
                         const ParameterDensity& prior_density, const PriorSpec& support,
                         const McmcConfig& config);

struct StageData {
  std::shared_ptr<const PcaPceSurrogate> surrogate;
  ObservationSet obs;
};

struct SequenceResult {
  std::vector<StagePosterior> stages;
  /// Prior push-forward through each stage's surrogate (noise free).
  std::vector<PredictiveBand> prior_predictive;
  /// cross[i][j]: stage-i posterior through stage-j surrogate. The diagonal is
  /// the posterior predictive with residual noise; off-diagonal bands are
  /// parameter-only forecasts (j > i) and hindcasts (j < i).
  std::vector<std::vector<PredictiveBand>> cross;
};

/// Markovian sequence of stage updates; each stage's KDE becomes the next
/// stage's parameter prior. Stage 0 runs with config.seed, stage t > 0 with
/// derive_seed(config.seed, t).
SequenceResult run_sequence(const std::vector<StageData>& stages, const PriorSpec& prior0,
                            const McmcConfig& config);

}  // namespace pcapce
