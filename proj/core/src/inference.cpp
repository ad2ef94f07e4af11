#include "pcapce/inference.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <unsupported/Eigen/FFT>

#include "pcapce/error.hpp"

namespace pcapce {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

std::uint64_t stage_seed(std::uint64_t seed, std::size_t t) {
  return t == 0 ? seed : derive_seed(seed, t);
}

// Evenly strided subset of at most `cap` rows (all rows when cap is 0).
std::vector<Eigen::Index> strided_rows(Eigen::Index n, std::size_t cap) {
  const auto take = (cap == 0 || static_cast<Eigen::Index>(cap) >= n) ? n
                                                                      : static_cast<Eigen::Index>(cap);
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(take));
  for (Eigen::Index i = 0; i < take; ++i) {
    rows[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(
        static_cast<double>(i) * static_cast<double>(n) / static_cast<double>(take));
  }
  return rows;
}

}  // namespace

// ---------------------------------------------------------------------------
// Densities

double PriorDensity::logpdf(const Eigen::Ref<const Vector>& x) const {
  return prior_logpdf(prior_, x);
}

Matrix PriorDensity::sample(std::size_t n, std::uint64_t seed) const {
  return sample_prior(prior_, n, seed);
}

KernelDensity::KernelDensity(Matrix points, Vector bandwidths, PriorSpec support,
                             std::vector<bool> degenerate_dims)
    : points_(std::move(points)),
      bandwidths_(std::move(bandwidths)),
      support_(std::move(support)),
      degenerate_(std::move(degenerate_dims)) {
  const auto M = static_cast<Eigen::Index>(support_.dimension());
  if (points_.cols() != M || bandwidths_.size() != M) {
    throw Error(ErrorCode::DimensionMismatch, "kernel density: dimension mismatch");
  }
  log_norm_.resize(points_.rows(), M);
  const double log_sqrt_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  for (Eigen::Index j = 0; j < M; ++j) {
    const double h = bandwidths_[j];
    const double lo = support_.lower(j);
    const double hi = support_.upper(j);
    for (Eigen::Index i = 0; i < points_.rows(); ++i) {
      const double c = points_(i, j);
      const double mass = normal_cdf((hi - c) / h) - normal_cdf((lo - c) / h);
      log_norm_(i, j) = std::log(h) + log_sqrt_2pi + std::log(std::max(mass, 1e-300));
    }
  }
}

bool KernelDensity::any_degenerate() const {
  return std::find(degenerate_.begin(), degenerate_.end(), true) != degenerate_.end();
}

double KernelDensity::logpdf(const Eigen::Ref<const Vector>& x) const {
  if (!support_.contains(x)) return kNegInf;
  const Eigen::Index n = points_.rows();
  const Eigen::Index M = points_.cols();
  // Log-sum-exp over kernels.
  thread_local std::vector<double> terms;
  terms.resize(static_cast<std::size_t>(n));
  double peak = kNegInf;
  for (Eigen::Index i = 0; i < n; ++i) {
    double t = 0.0;
    for (Eigen::Index j = 0; j < M; ++j) {
      const double u = (x[j] - points_(i, j)) / bandwidths_[j];
      t -= 0.5 * u * u + log_norm_(i, j);
    }
    terms[static_cast<std::size_t>(i)] = t;
    peak = std::max(peak, t);
  }
  if (peak == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - peak);
  return peak + std::log(sum) - std::log(static_cast<double>(n));
}

Matrix KernelDensity::sample(std::size_t n, std::uint64_t seed) const {
  Rng rng = make_rng(seed, 0x6bde);
  std::normal_distribution<double> normal;
  const Eigen::Index M = points_.cols();
  Matrix out(static_cast<Eigen::Index>(n), M);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const auto i = static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(points_.rows()));
    for (Eigen::Index j = 0; j < M; ++j) {
      const double lo = support_.lower(j);
      const double hi = support_.upper(j);
      double v = points_(i, j);
      // Rejection from the truncated kernel; the centre lies inside the box so
      // at least half of the kernel mass is admissible.
      for (int attempt = 0; attempt < 1000; ++attempt) {
        const double trial = points_(i, j) + bandwidths_[j] * normal(rng);
        if (trial >= lo && trial <= hi) {
          v = trial;
          break;
        }
      }
      out(r, j) = v;
    }
  }
  return out;
}

KernelDensity kde_fit(const Matrix& samples, const PriorSpec& bounds, std::size_t max_points) {
  const auto M = static_cast<Eigen::Index>(bounds.dimension());
  if (samples.cols() != M) throw Error(ErrorCode::DimensionMismatch, "kde_fit: dimension mismatch");
  if (samples.rows() < 10) throw Error(ErrorCode::InsufficientSamples, "kde_fit needs n >= 10");

  const auto rows = strided_rows(samples.rows(), max_points);
  Matrix points(static_cast<Eigen::Index>(rows.size()), M);
  for (std::size_t r = 0; r < rows.size(); ++r) points.row(static_cast<Eigen::Index>(r)) = samples.row(rows[r]);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = 0; j < M; ++j) {
      points(i, j) = std::clamp(points(i, j), bounds.lower(j), bounds.upper(j));
    }
  }

  const auto n = static_cast<double>(points.rows());
  Vector h(M);
  std::vector<bool> degenerate(static_cast<std::size_t>(M), false);
  for (Eigen::Index j = 0; j < M; ++j) {
    const double mean = points.col(j).mean();
    const double sd = std::sqrt((points.col(j).array() - mean).square().sum() / (n - 1.0));
    const double width = bounds.upper(j) - bounds.lower(j);
    if (!(sd > 1e-12 * width)) {
      degenerate[static_cast<std::size_t>(j)] = true;
      h[j] = 1e-6 * width;
    } else {
      h[j] = 1.06 * sd * std::pow(n, -0.2);
    }
  }
  return KernelDensity(std::move(points), std::move(h), bounds, std::move(degenerate));
}

// ---------------------------------------------------------------------------
// Likelihood and posterior

double log_likelihood(const PcaPceSurrogate& surrogate, const ObservationSet& obs,
                      const AugmentedPoint& p) {
  if (!(p.sigma2 > 0.0)) throw Error(ErrorCode::InvalidArgument, "log_likelihood needs sigma2 > 0");
  if (obs.vectors.cols() != surrogate.n_output()) {
    throw Error(ErrorCode::DimensionMismatch, "observations do not match surrogate output size");
  }
  if (!surrogate.prior.contains(p.x_m)) return kNegInf;
  const Vector pred = surrogate.predict(p.x_m);
  const auto N = static_cast<double>(obs.vectors.cols());
  const double per_vector = -0.5 * N * std::log(2.0 * std::numbers::pi) - 0.5 * N * std::log(p.sigma2);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < obs.vectors.rows(); ++i) {
    const double sq = (obs.vectors.row(i).transpose() - pred).squaredNorm();
    ll += per_vector - sq / (2.0 * p.sigma2);
  }
  return ll;
}

double sigma2_prior_max(const ObservationSet& obs) {
  if (obs.vectors.size() == 0) throw Error(ErrorCode::EmptySamples, "no observations");
  const double m = obs.vectors.maxCoeff();
  if (!(m > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "residual-variance prior needs a positive observation");
  }
  return m;
}

double log_posterior(const ParameterDensity& prior, double sigma2_max,
                     const PcaPceSurrogate& surrogate, const ObservationSet& obs,
                     const AugmentedPoint& p) {
  const double lp = prior.logpdf(p.x_m);
  if (lp == kNegInf) return kNegInf;
  if (!(p.sigma2 > 0.0 && p.sigma2 <= sigma2_max)) return kNegInf;
  return lp - std::log(sigma2_max) + log_likelihood(surrogate, obs, p);
}

double log_posterior(const PriorSpec& prior, double sigma2_max, const PcaPceSurrogate& surrogate,
                     const ObservationSet& obs, const AugmentedPoint& p) {
  return log_posterior(PriorDensity(prior), sigma2_max, surrogate, obs, p);
}

// ---------------------------------------------------------------------------
// Ensemble sampler

ChainEnsemble::ChainEnsemble(std::size_t steps, std::size_t walkers, std::size_t dim,
                             std::uint64_t seed)
    : steps_(steps),
      walkers_(walkers),
      dim_(dim),
      seed_(seed),
      samples_(steps * walkers * dim, 0.0),
      log_posts_(steps * walkers, kNegInf) {}

double draw_stretch(Rng& rng, double a) {
  const double u = uniform01(rng);
  const double s = (a - 1.0) * u + 1.0;
  return s * s / a;
}

ChainEnsemble aies_sample(const LogDensity& logpost, const Matrix& init, std::size_t n_steps,
                          double stretch_a, std::uint64_t seed) {
  const auto walkers = static_cast<std::size_t>(init.rows());
  const auto dim = static_cast<std::size_t>(init.cols());
  if (dim == 0 || walkers % 2 != 0 || walkers < 2 * dim) {
    throw Error(ErrorCode::InvalidArgument,
                "ensemble needs an even number of walkers, at least twice the dimension");
  }
  if (n_steps == 0) throw Error(ErrorCode::InvalidArgument, "need at least one step");
  if (!(stretch_a > 1.0)) throw Error(ErrorCode::InvalidArgument, "stretch scale must exceed 1");

  ChainEnsemble chains(n_steps, walkers, dim, seed);
  Matrix current = init;
  Vector current_lp(static_cast<Eigen::Index>(walkers));
  for (std::size_t w = 0; w < walkers; ++w) {
    current_lp[static_cast<Eigen::Index>(w)] = logpost(current.row(static_cast<Eigen::Index>(w)).transpose());
    if (!std::isfinite(current_lp[static_cast<Eigen::Index>(w)])) {
      throw Error(ErrorCode::InvalidInit,
                  "walker " + std::to_string(w) + " starts at a non-finite log posterior");
    }
  }

  const std::size_t half = walkers / 2;
  const double d_minus_one = static_cast<double>(dim) - 1.0;
  Vector proposal(static_cast<Eigen::Index>(dim));
  for (std::size_t step = 0; step < n_steps; ++step) {
    for (std::size_t part = 0; part < 2; ++part) {
      const std::size_t first = part * half;
      const std::size_t other = (1 - part) * half;
      for (std::size_t w = first; w < first + half; ++w) {
        Rng rng = make_rng(seed, step, w);
        const auto k = static_cast<Eigen::Index>(
            other + std::min(half - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(half))));
        const double z = draw_stretch(rng, stretch_a);
        const double log_u = std::log(uniform01(rng));
        const auto wi = static_cast<Eigen::Index>(w);
        proposal = current.row(k).transpose() +
                   z * (current.row(wi).transpose() - current.row(k).transpose());
        const double lp = logpost(proposal);
        ++chains.proposed;
        if (std::isfinite(lp) && log_u < d_minus_one * std::log(z) + lp - current_lp[wi]) {
          current.row(wi) = proposal.transpose();
          current_lp[wi] = lp;
          ++chains.accepted;
        }
      }
    }
    for (std::size_t w = 0; w < walkers; ++w) {
      chains.position(step, w) = current.row(static_cast<Eigen::Index>(w)).transpose();
      chains.log_post(step, w) = current_lp[static_cast<Eigen::Index>(w)];
    }
  }
  return chains;
}

RetainedSamples burn_in(const ChainEnsemble& chains, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "burn-in fraction must lie in [0, 1)");
  }
  const double raw = fraction * static_cast<double>(chains.steps());
  // Products like 0.7 * 10 must discard exactly 7 steps, not 8.
  const auto drop = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  if (drop >= chains.steps()) throw Error(ErrorCode::EmptyChain, "burn-in discards every step");
  const std::size_t keep = chains.steps() - drop;
  RetainedSamples out;
  out.samples.resize(static_cast<Eigen::Index>(keep * chains.walkers()),
                     static_cast<Eigen::Index>(chains.dim()));
  out.log_posts.resize(out.samples.rows());
  Eigen::Index r = 0;
  for (std::size_t s = drop; s < chains.steps(); ++s) {
    for (std::size_t w = 0; w < chains.walkers(); ++w, ++r) {
      out.samples.row(r) = chains.position(s, w).transpose();
      out.log_posts[r] = chains.log_post(s, w);
    }
  }
  return out;
}

AugmentedPoint map_estimate(const Matrix& samples, const Vector& log_posts) {
  if (samples.rows() == 0 || samples.cols() < 2) throw Error(ErrorCode::EmptyChain, "no samples");
  if (log_posts.size() != samples.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "map_estimate: log posterior count");
  }
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < log_posts.size(); ++i) {
    if (log_posts[i] > log_posts[best]) best = i;
  }
  AugmentedPoint p;
  p.x_m = samples.row(best).head(samples.cols() - 1).transpose();
  p.sigma2 = samples(best, samples.cols() - 1);
  return p;
}

Vector autocorrelation_times(const ChainEnsemble& chains, std::size_t first_step) {
  if (first_step >= chains.steps()) throw Error(ErrorCode::EmptyChain, "no steps to analyse");
  const std::size_t n = chains.steps() - first_step;
  const auto dim = static_cast<Eigen::Index>(chains.dim());
  Vector tau(dim);
  Eigen::FFT<double> fft;
  std::size_t padded = 1;
  while (padded < 2 * n) padded <<= 1;

  for (Eigen::Index p = 0; p < dim; ++p) {
    std::vector<double> acf(n, 0.0);
    for (std::size_t w = 0; w < chains.walkers(); ++w) {
      std::vector<double> x(padded, 0.0);
      double mean = 0.0;
      for (std::size_t s = 0; s < n; ++s) mean += chains.position(first_step + s, w)[p];
      mean /= static_cast<double>(n);
      for (std::size_t s = 0; s < n; ++s) x[s] = chains.position(first_step + s, w)[p] - mean;
      std::vector<std::complex<double>> freq;
      fft.fwd(freq, x);
      for (auto& f : freq) f = std::norm(f);
      std::vector<double> back;
      fft.inv(back, freq);
      if (back[0] <= 0.0) continue;  // walker never moved in this coordinate
      for (std::size_t t = 0; t < n; ++t) acf[t] += back[t] / back[0];
    }
    const double scale = acf[0];
    if (!(scale > 0.0)) {
      tau[p] = std::numeric_limits<double>::infinity();
      continue;
    }
    double running = 1.0;
    std::size_t window = 1;
    for (; window < n; ++window) {
      running += 2.0 * acf[window] / scale;
      if (static_cast<double>(window) >= 5.0 * running) break;
    }
    tau[p] = std::max(running, 1.0);
  }
  return tau;
}

// ---------------------------------------------------------------------------
// Predictive distributions

double sorted_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw Error(ErrorCode::EmptySamples, "quantile of nothing");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

PredictiveBand predictive_interval(const PcaPceSurrogate& surrogate, const Matrix& param_samples,
                                   double level, std::size_t sample_cap, std::uint64_t noise_seed) {
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::InvalidArgument, "level in (0, 1)");
  if (param_samples.rows() == 0) throw Error(ErrorCode::EmptySamples, "no parameter samples");
  const auto M = static_cast<Eigen::Index>(surrogate.n_input());
  const bool noisy = param_samples.cols() == M + 1;
  if (!noisy && param_samples.cols() != M) {
    throw Error(ErrorCode::DimensionMismatch, "predictive_interval: sample width");
  }

  const auto rows = strided_rows(param_samples.rows(), sample_cap);
  const Eigen::Index N = surrogate.n_output();
  Matrix draws(static_cast<Eigen::Index>(rows.size()), N);
  Rng rng = make_rng(noise_seed, 0x9d1c);
  std::normal_distribution<double> normal;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    draws.row(ri) = surrogate.predict(param_samples.row(rows[r]).head(M).transpose()).transpose();
    if (noisy) {
      const double sd = std::sqrt(std::max(param_samples(rows[r], M), 0.0));
      for (Eigen::Index c = 0; c < N; ++c) draws(ri, c) += sd * normal(rng);
    }
  }

  PredictiveBand band{Vector(N), Vector(N)};
  std::vector<double> column(rows.size());
  for (Eigen::Index c = 0; c < N; ++c) {
    for (std::size_t r = 0; r < rows.size(); ++r) column[r] = draws(static_cast<Eigen::Index>(r), c);
    std::sort(column.begin(), column.end());
    band.lo[c] = sorted_quantile(column, 0.5 * (1.0 - level));
    band.hi[c] = sorted_quantile(column, 0.5 * (1.0 + level));
  }
  return band;
}

// ---------------------------------------------------------------------------
// Stage updates

void McmcConfig::validate(std::size_t n_params) const {
  const std::size_t dim = n_params + (sigma2_fixed ? 0 : 1);
  if (walkers % 2 != 0 || walkers < 2 * dim) {
    throw Error(ErrorCode::ConfigInvalid, "walkers must be even and at least " +
                                              std::to_string(2 * dim));
  }
  if (steps < 2) throw Error(ErrorCode::ConfigInvalid, "need at least 2 MCMC steps");
  if (!(burn_in >= 0.0 && burn_in < 1.0)) throw Error(ErrorCode::ConfigInvalid, "burn_in in [0, 1)");
  if (!(stretch_a > 1.0)) throw Error(ErrorCode::ConfigInvalid, "stretch_a must exceed 1");
  if (!(predictive_level > 0.0 && predictive_level < 1.0)) {
    throw Error(ErrorCode::ConfigInvalid, "predictive level in (0, 1)");
  }
  if (sigma2_fixed && !(*sigma2_fixed > 0.0)) {
    throw Error(ErrorCode::ConfigInvalid, "fixed sigma2 must be positive");
  }
}

StagePosterior run_stage(const PcaPceSurrogate& surrogate, const ObservationSet& obs,
                         const ParameterDensity& prior_density, const PriorSpec& support,
                         const McmcConfig& config) {
  const std::size_t M = support.dimension();
  if (prior_density.dimension() != M || surrogate.n_input() != M) {
    throw Error(ErrorCode::DimensionMismatch, "run_stage: parameter dimension mismatch");
  }
  config.validate(M);
  const double s2max = sigma2_prior_max(obs);
  const bool sample_sigma = !config.sigma2_fixed.has_value();
  const std::size_t dim = M + (sample_sigma ? 1 : 0);
  const auto Mi = static_cast<Eigen::Index>(M);

  auto to_point = [&](const Eigen::Ref<const Vector>& theta) {
    AugmentedPoint p;
    p.x_m = theta.head(Mi);
    p.sigma2 = sample_sigma ? theta[Mi] : *config.sigma2_fixed;
    return p;
  };
  LogDensity logpost = [&](const Eigen::Ref<const Vector>& theta) {
    const AugmentedPoint p = to_point(theta);
    if (sample_sigma) return log_posterior(prior_density, s2max, surrogate, obs, p);
    const double lp = prior_density.logpdf(p.x_m);
    if (lp == kNegInf) return kNegInf;
    return lp + log_likelihood(surrogate, obs, p);
  };

  Matrix init(static_cast<Eigen::Index>(config.walkers), static_cast<Eigen::Index>(dim));
  init.leftCols(Mi) = prior_density.sample(config.walkers, derive_seed(config.seed, 0x1417));
  if (sample_sigma) {
    Rng rng = make_rng(config.seed, 0x5167);
    for (Eigen::Index w = 0; w < init.rows(); ++w) init(w, Mi) = s2max * (1.0 - uniform01(rng));
  }

  auto chains = std::make_shared<ChainEnsemble>(
      aies_sample(logpost, init, config.steps, config.stretch_a, config.seed));
  RetainedSamples kept = burn_in(*chains, config.burn_in);

  StagePosterior out;
  out.stage_id = obs.stage_id;
  out.seed = config.seed;
  out.sigma2_max = s2max;
  if (sample_sigma) {
    out.post_samples = std::move(kept.samples);
  } else {
    out.post_samples.resize(kept.samples.rows(), Mi + 1);
    out.post_samples.leftCols(Mi) = kept.samples;
    out.post_samples.col(Mi).setConstant(*config.sigma2_fixed);
  }
  out.post_log_posts = std::move(kept.log_posts);
  out.x_map = map_estimate(out.post_samples, out.post_log_posts);
  out.mean = out.post_samples.colwise().mean().transpose();
  out.stddev = ((out.post_samples.rowwise() - out.mean.transpose()).array().square().colwise().sum() /
                static_cast<double>(std::max<Eigen::Index>(out.post_samples.rows() - 1, 1)))
                   .sqrt()
                   .transpose();
  out.predictive = predictive_interval(surrogate, out.post_samples, config.predictive_level,
                                       config.predictive_cap, derive_seed(config.seed, 0x9e7));
  out.kde = std::make_shared<KernelDensity>(
      kde_fit(out.post_samples.leftCols(Mi), support, config.kde_max_points));
  out.acceptance_rate = chains->acceptance_rate();
  const std::size_t first_kept = chains->steps() - static_cast<std::size_t>(
                                                      out.post_samples.rows() / static_cast<Eigen::Index>(chains->walkers()));
  out.autocorr_times = autocorrelation_times(*chains, first_kept);
  const double worst_tau = out.autocorr_times.maxCoeff();
  out.short_chain = !(static_cast<double>(chains->steps()) >= 50.0 * worst_tau);
  out.chains = std::move(chains);
  return out;
}

SequenceResult run_sequence(const std::vector<StageData>& stages, const PriorSpec& prior0,
                            const McmcConfig& config) {
  if (stages.empty()) throw Error(ErrorCode::InvalidArgument, "run_sequence needs a stage");
  SequenceResult out;
  const PriorDensity initial(prior0);

  for (std::size_t t = 0; t < stages.size(); ++t) {
    McmcConfig cfg = config;
    cfg.seed = stage_seed(config.seed, t);
    const ParameterDensity& prior =
        t == 0 ? static_cast<const ParameterDensity&>(initial) : *out.stages.back().kde;
    out.stages.push_back(run_stage(*stages[t].surrogate, stages[t].obs, prior, prior0, cfg));
  }

  const Matrix prior_draws =
      sample_prior(prior0, std::max<std::size_t>(config.predictive_cap, 1), derive_seed(config.seed, 0x7001));
  for (const auto& s : stages) {
    out.prior_predictive.push_back(
        predictive_interval(*s.surrogate, prior_draws, config.predictive_level, config.predictive_cap));
  }
  const auto M = static_cast<Eigen::Index>(prior0.dimension());
  for (std::size_t i = 0; i < out.stages.size(); ++i) {
    std::vector<PredictiveBand> row;
    for (std::size_t j = 0; j < stages.size(); ++j) {
      if (i == j) {
        row.push_back(out.stages[i].predictive);
      } else {
        row.push_back(predictive_interval(*stages[j].surrogate, out.stages[i].post_samples.leftCols(M),
                                          config.predictive_level, config.predictive_cap));
      }
    }
    out.cross.push_back(std::move(row));
  }
  return out;
}

}  // namespace pcapce
