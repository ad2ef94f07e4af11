#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "oracles.hpp"
#include "pcapce/error.hpp"
#include "pcapce/inference.hpp"
#include "surrogate_fixtures.hpp"

using namespace pcapce;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

double gaussian_logpdf(const Eigen::Ref<const Vector>& x) { return -0.5 * x.squaredNorm(); }

Matrix random_init(std::size_t walkers, std::size_t dim, std::uint64_t seed, double lo, double hi) {
  Rng rng(seed);
  Matrix init(static_cast<Eigen::Index>(walkers), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < init.size(); ++i) init.data()[i] = lo + (hi - lo) * uniform01(rng);
  return init;
}

double ks_uniform(std::vector<double> v, double lo, double hi) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double F = (v[i] - lo) / (hi - lo);
    d = std::max({d, F - i / n, (i + 1) / n - F});
  }
  return d;
}

ObservationSet obs_of(const Matrix& rows, int stage = 1) {
  ObservationSet o;
  o.vectors = rows;
  o.stage_id = stage;
  return o;
}

}  // namespace

// ---------------------------------------------------------------------------
// Likelihood and posterior

TEST(LogLikelihood, ZeroResidualAndNormalisation) {
  const PriorSpec prior = fixture::unit_box(3);
  const PcaPceSurrogate s = fixture::constant_surrogate(prior, Vector::LinSpaced(101, 0.0, 1.0));
  const Vector x = Vector::Constant(3, 0.2);
  const ObservationSet one = obs_of(s.predict(x).transpose());
  const double l1 = log_likelihood(s, one, {x, 1.0});
  EXPECT_NEAR(l1, -50.5 * std::log(2 * std::numbers::pi), 1e-10);
  EXPECT_NEAR(log_likelihood(s, one, {x, 2.0}) - l1, -50.5 * std::log(2.0), 1e-10);
  Matrix two(2, 101);
  two.row(0) = one.vectors.row(0);
  two.row(1) = one.vectors.row(0);
  EXPECT_EQ(log_likelihood(s, obs_of(two), {x, 1.0}), 2.0 * l1);
  EXPECT_EQ(log_likelihood(s, one, {Vector::Constant(3, 1.5), 1.0}), kNegInf);
}

TEST(LogLikelihood, ResidualTerm) {
  const PriorSpec prior = fixture::unit_box(2);
  Matrix A(3, 2);
  A << 1, 0, 0, 2, 1, 1;
  const PcaPceSurrogate s = fixture::affine_surrogate(prior, A, Vector::Zero(3));
  const Vector x{{0.5, -0.25}};
  const Vector y{{0.0, 0.0, 1.0}};
  const Vector pred = A * x;
  const double sigma2 = 0.3;
  const double expected = -1.5 * std::log(2 * std::numbers::pi * sigma2) - (y - pred).squaredNorm() / (2 * sigma2);
  EXPECT_NEAR(log_likelihood(s, obs_of(y.transpose()), {x, sigma2}), expected, 1e-12);
}

TEST(LogPosterior, SupportAndTermByTerm) {
  const PriorSpec prior({{"a", Uniform{0, 4}}, {"b", Uniform{-1, 1}}});
  Matrix A(4, 2);
  A << 1, 0, 0, 1, 1, 1, 2, -1;
  const PcaPceSurrogate s = fixture::affine_surrogate(prior, A, Vector::Constant(4, 3.0));
  Matrix Y(1, 4);
  Y << 2.5, 3.5, 4.0, 1.0;
  const ObservationSet obs = obs_of(Y);
  const double s2max = sigma2_prior_max(obs);
  EXPECT_EQ(s2max, 4.0);
  const AugmentedPoint p{Vector{{1.0, 0.2}}, 0.5};
  const double expected = prior_logpdf(prior, p.x_m) - std::log(s2max) + log_likelihood(s, obs, p);
  EXPECT_NEAR(log_posterior(prior, s2max, s, obs, p), expected, 1e-12);
  EXPECT_EQ(log_posterior(prior, s2max, s, obs, {p.x_m, 4.5}), kNegInf);
  EXPECT_EQ(log_posterior(prior, s2max, s, obs, {Vector{{5.0, 0.0}}, 0.5}), kNegInf);
  EXPECT_EQ(log_posterior(prior, s2max, s, obs, {p.x_m, 0.0}), kNegInf);

  // Differences decompose exactly into prior and likelihood differences.
  const AugmentedPoint q{Vector{{3.1, -0.7}}, 1.7};
  const double lhs = log_posterior(prior, s2max, s, obs, p) - log_posterior(prior, s2max, s, obs, q);
  const double rhs = (prior_logpdf(prior, p.x_m) - prior_logpdf(prior, q.x_m)) +
                     (log_likelihood(s, obs, p) - log_likelihood(s, obs, q));
  EXPECT_NEAR(lhs, rhs, 1e-12);
  const PriorDensity density(prior);
  EXPECT_EQ(log_posterior(density, s2max, s, obs, q), log_posterior(prior, s2max, s, obs, q));
}

// ---------------------------------------------------------------------------
// Sampler

TEST(DrawStretch, MeanMatchesQuadrature) {
  const double a = 2.0;
  const auto [nodes, weights] = oracle::gauss_legendre(40);
  double num = 0.0, den = 0.0;
  for (Eigen::Index q = 0; q < nodes.size(); ++q) {
    const double z = 0.5 * (a + 1.0 / a) + 0.5 * (a - 1.0 / a) * nodes[q];
    num += weights[q] * std::sqrt(z);
    den += weights[q] / std::sqrt(z);
  }
  const double analytic = num / den;
  Rng rng(5);
  double sum = 0.0;
  double lo = a, hi = 0.0;
  for (int i = 0; i < 1000000; ++i) {
    const double z = draw_stretch(rng, a);
    sum += z;
    lo = std::min(lo, z);
    hi = std::max(hi, z);
  }
  EXPECT_NEAR(sum / 1e6 / analytic, 1.0, 0.005);
  EXPECT_GE(lo, 1.0 / a);
  EXPECT_LE(hi, a);
}

TEST(Aies, StandardGaussianMoments) {
  const ChainEnsemble c = aies_sample(gaussian_logpdf, random_init(32, 3, 1, -1, 1), 5000, 2.0, 42);
  const RetainedSamples r = burn_in(c, 0.7);
  for (Eigen::Index j = 0; j < 3; ++j) {
    const double m = r.samples.col(j).mean();
    const double v = (r.samples.col(j).array() - m).square().sum() / (r.samples.rows() - 1.0);
    EXPECT_NEAR(m, 0.0, 0.05);
    EXPECT_NEAR(v, 1.0, 0.1);
  }
  EXPECT_GT(c.acceptance_rate(), 0.2);
  EXPECT_LT(c.acceptance_rate(), 0.7);
}

TEST(Aies, FlatTargetOneDimensionAcceptsEveryInBoxProposal) {
  std::size_t in_box = 0;
  LogDensity flat = [&](const Eigen::Ref<const Vector>& x) {
    if (x[0] < 0.0 || x[0] > 1.0) return kNegInf;
    ++in_box;
    return 0.0;
  };
  const Matrix init = random_init(20, 1, 3, 0, 1);
  const ChainEnsemble c = aies_sample(flat, init, 2000, 2.0, 9);
  in_box -= 20;  // the initial evaluations
  EXPECT_EQ(c.accepted, in_box);
}

TEST(Aies, FlatTargetIsUniform) {
  LogDensity flat = [](const Eigen::Ref<const Vector>& x) {
    return (x.array() >= 0.0).all() && (x.array() <= 1.0).all() ? 0.0 : kNegInf;
  };
  const ChainEnsemble c = aies_sample(flat, random_init(50, 2, 4, 0, 1), 4000, 2.0, 17);
  for (std::size_t j = 0; j < 2; ++j) {
    std::vector<double> v;
    for (std::size_t s = 2000; s < 4000; s += 10) {
      for (std::size_t w = 0; w < 50; ++w) v.push_back(c.position(s, w)[static_cast<Eigen::Index>(j)]);
    }
    ASSERT_EQ(v.size(), 10000u);
    EXPECT_LT(ks_uniform(v, 0.0, 1.0), 0.02) << "dimension " << j;
  }
}

TEST(Aies, AcceptanceBookkeeping) {
  std::size_t calls = 0;
  LogDensity counted = [&](const Eigen::Ref<const Vector>& x) {
    ++calls;
    return gaussian_logpdf(x);
  };
  const Matrix init = random_init(10, 2, 8, -2, 2);
  const ChainEnsemble c = aies_sample(counted, init, 300, 2.0, 1);
  EXPECT_EQ(c.proposed, calls - 10);
  EXPECT_EQ(c.proposed, 300u * 10u);
  std::size_t moved = 0;
  for (std::size_t s = 0; s < c.steps(); ++s) {
    for (std::size_t w = 0; w < c.walkers(); ++w) {
      const Vector before = s == 0 ? Vector(init.row(static_cast<Eigen::Index>(w)).transpose())
                                   : Vector(c.position(s - 1, w));
      if ((c.position(s, w) - before).cwiseAbs().maxCoeff() > 0.0) ++moved;
    }
  }
  EXPECT_EQ(c.accepted, moved);
  EXPECT_EQ(c.acceptance_rate(), static_cast<double>(c.accepted) / static_cast<double>(c.proposed));
}

TEST(Aies, AffineEquivariance) {
  Matrix T(3, 3);
  T << 2.0, 0.3, 0.0, -0.5, 1.0, 0.2, 0.1, 0.0, 0.7;
  const Vector shift{{1.0, -2.0, 0.5}};
  const Matrix Tinv = T.inverse();
  LogDensity mapped = [&](const Eigen::Ref<const Vector>& y) {
    return gaussian_logpdf(Tinv * (y - shift));
  };
  const Matrix init = random_init(12, 3, 5, -1, 1);
  const Matrix init_mapped = (init * T.transpose()).rowwise() + shift.transpose();
  const ChainEnsemble a = aies_sample(gaussian_logpdf, init, 400, 2.0, 11);
  const ChainEnsemble b = aies_sample(mapped, init_mapped, 400, 2.0, 11);
  EXPECT_EQ(a.accepted, b.accepted);
  double worst = 0.0;
  for (std::size_t s = 0; s < a.steps(); ++s) {
    for (std::size_t w = 0; w < a.walkers(); ++w) {
      const Vector expect = T * a.position(s, w) + shift;
      worst = std::max(worst, (b.position(s, w) - expect).cwiseAbs().maxCoeff());
    }
  }
  EXPECT_LT(worst, 1e-6);  // rounding only; accept decisions already match
}

TEST(Aies, Reproducible) {
  const Matrix init = random_init(8, 2, 2, -1, 1);
  const ChainEnsemble a = aies_sample(gaussian_logpdf, init, 100, 2.0, 3);
  const ChainEnsemble b = aies_sample(gaussian_logpdf, init, 100, 2.0, 3);
  for (std::size_t w = 0; w < 8; ++w) EXPECT_EQ((a.position(99, w) - b.position(99, w)).norm(), 0.0);
}

TEST(Aies, InvalidInputs) {
  Matrix init = random_init(8, 2, 2, -1, 1);
  init(3, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(code_of([&] { aies_sample(gaussian_logpdf, init, 10, 2.0, 1); }), ErrorCode::InvalidInit);
  LogDensity box = [](const Eigen::Ref<const Vector>& x) { return x[0] > 0 ? 0.0 : kNegInf; };
  EXPECT_EQ(code_of([&] { aies_sample(box, random_init(8, 2, 1, -1, 0), 10, 2.0, 1); }),
            ErrorCode::InvalidInit);
  EXPECT_THROW(aies_sample(gaussian_logpdf, random_init(7, 2, 1, -1, 1), 10, 2.0, 1), Error);
  EXPECT_THROW(aies_sample(gaussian_logpdf, random_init(2, 2, 1, -1, 1), 10, 2.0, 1), Error);
}

// ---------------------------------------------------------------------------
// Post-processing

TEST(BurnIn, CountArithmetic) {
  const ChainEnsemble c(10, 4, 2, 0);
  EXPECT_EQ(burn_in(c, 0.7).samples.rows(), 12);
  EXPECT_EQ(burn_in(c, 0.0).samples.rows(), 40);
  EXPECT_EQ(code_of([&] { burn_in(c, 0.99); }), ErrorCode::EmptyChain);
}

TEST(BurnIn, KeepsTailInStepMajorOrder) {
  ChainEnsemble c(5, 2, 1, 0);
  for (std::size_t s = 0; s < 5; ++s) {
    for (std::size_t w = 0; w < 2; ++w) {
      c.position(s, w)[0] = 10.0 * s + w;
      c.log_post(s, w) = -static_cast<double>(s);
    }
  }
  const RetainedSamples r = burn_in(c, 0.6);
  ASSERT_EQ(r.samples.rows(), 4);
  EXPECT_EQ(r.samples(0, 0), 30.0);
  EXPECT_EQ(r.samples(1, 0), 31.0);
  EXPECT_EQ(r.samples(3, 0), 41.0);
  EXPECT_EQ(r.log_posts[2], -4.0);
}

TEST(MapEstimate, Examples) {
  Matrix one(1, 3);
  one << 1.0, 2.0, 0.5;
  const AugmentedPoint p = map_estimate(one, Vector::Constant(1, -3.0));
  EXPECT_EQ(p.x_m, (Vector{{1.0, 2.0}}));
  EXPECT_EQ(p.sigma2, 0.5);

  Matrix S = Matrix::Random(50, 3);
  Vector lp = -Vector::Random(50).cwiseAbs();
  S.row(17) << 9.0, 9.0, 9.0;
  lp[17] = lp.maxCoeff() + 10.0;
  EXPECT_EQ(map_estimate(S, lp).x_m, (Vector{{9.0, 9.0}}));

  lp.setConstant(1.0);
  EXPECT_EQ(map_estimate(S, lp).x_m, S.row(0).head(2).transpose());
  EXPECT_EQ(code_of([&] { map_estimate(Matrix(0, 3), Vector(0)); }), ErrorCode::EmptyChain);
}

TEST(MapEstimate, GaussianModeBound) {
  // Target: standard Gaussian over (x1, x2, s). The chain's MAP sample is the
  // best of n correlated draws; compare with the distribution of the best of
  // n_eff independent draws, simulated directly.
  const ChainEnsemble c = aies_sample(gaussian_logpdf, random_init(20, 3, 6, -1, 1), 1700, 2.0, 8);
  const RetainedSamples r = burn_in(c, 0.7);
  ASSERT_GE(r.samples.rows(), 10000);
  const AugmentedPoint p = map_estimate(r.samples, r.log_posts);
  const double tau = autocorrelation_times(c, c.steps() - 510).maxCoeff();
  const auto n_eff = static_cast<std::size_t>(static_cast<double>(r.samples.rows()) / tau);

  Rng rng(99);
  std::normal_distribution<double> normal;
  std::vector<double> best_axis;
  for (int rep = 0; rep < 200; ++rep) {
    double best_norm = std::numeric_limits<double>::infinity();
    double axis = 0.0;
    for (std::size_t i = 0; i < n_eff; ++i) {
      const double a = normal(rng), b = normal(rng), d = normal(rng);
      const double q = a * a + b * b + d * d;
      if (q < best_norm) {
        best_norm = q;
        axis = std::max(std::abs(a), std::abs(b));
      }
    }
    best_axis.push_back(axis);
  }
  std::sort(best_axis.begin(), best_axis.end());
  const double bound = sorted_quantile(best_axis, 0.99);
  for (Eigen::Index j = 0; j < 2; ++j) EXPECT_LT(std::abs(p.x_m[j]), bound) << "axis " << j;
}

TEST(Autocorrelation, IndependentDrawsHaveUnitTime) {
  ChainEnsemble c(4000, 4, 1, 0);
  Rng rng(1);
  std::normal_distribution<double> n;
  for (std::size_t s = 0; s < 4000; ++s)
    for (std::size_t w = 0; w < 4; ++w) c.position(s, w)[0] = n(rng);
  EXPECT_NEAR(autocorrelation_times(c)[0], 1.0, 0.2);

  // AR(1) with coefficient r has integrated time (1 + r) / (1 - r).
  const double r = 0.8;
  ChainEnsemble ar(20000, 4, 1, 0);
  for (std::size_t w = 0; w < 4; ++w) {
    double x = 0.0;
    for (std::size_t s = 0; s < 20000; ++s) {
      x = r * x + std::sqrt(1 - r * r) * n(rng);
      ar.position(s, w)[0] = x;
    }
  }
  EXPECT_NEAR(autocorrelation_times(ar)[0] / 9.0, 1.0, 0.15);
}

TEST(Predictive, ConstantSurrogateHasZeroWidth) {
  const PriorSpec prior = fixture::unit_box(3);
  const Vector c = Vector::LinSpaced(7, 1.0, 2.0);
  const PcaPceSurrogate s = fixture::constant_surrogate(prior, c);
  const PredictiveBand b = predictive_interval(s, sample_prior(prior, 500, 1), 0.99, 4000);
  EXPECT_LE((b.lo - c).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((b.hi - c).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(code_of([&] { predictive_interval(s, Matrix(0, 3), 0.99, 10); }), ErrorCode::EmptySamples);
}

TEST(Predictive, NoiseHalfWidthMatchesNormalQuantile) {
  const PriorSpec prior = fixture::unit_box(2);
  const PcaPceSurrogate s = fixture::constant_surrogate(prior, Vector::Constant(5, 3.0));
  const double var = 0.04;
  Matrix samples(10000, 3);
  samples.leftCols(2) = sample_prior(prior, 10000, 2);
  samples.col(2).setConstant(var);
  const PredictiveBand b = predictive_interval(s, samples, 0.99, 10000, 7);
  for (Eigen::Index n = 0; n < 5; ++n) {
    EXPECT_NEAR(0.5 * (b.hi[n] - b.lo[n]) / (2.5758293035489 * std::sqrt(var)), 1.0, 0.05);
  }
}

TEST(Predictive, IntervalsNestAcrossLevels) {
  const PriorSpec prior = fixture::unit_box(2);
  Matrix A(6, 2);
  A.setRandom();
  const PcaPceSurrogate s = fixture::affine_surrogate(prior, A, Vector::Zero(6));
  Matrix samples(3000, 3);
  samples.leftCols(2) = sample_prior(prior, 3000, 3);
  samples.col(2).setConstant(0.1);
  const PredictiveBand narrow = predictive_interval(s, samples, 0.5, 4000, 1);
  const PredictiveBand wide = predictive_interval(s, samples, 0.99, 4000, 1);
  for (Eigen::Index n = 0; n < 6; ++n) {
    EXPECT_LE(wide.lo[n], narrow.lo[n]);
    EXPECT_LE(narrow.lo[n], narrow.hi[n]);
    EXPECT_LE(narrow.hi[n], wide.hi[n]);
  }
}

TEST(SortedQuantile, TypeSeven) {
  const std::vector<double> v{1, 2, 3, 4, 5};
  EXPECT_EQ(sorted_quantile(v, 0.0), 1.0);
  EXPECT_EQ(sorted_quantile(v, 1.0), 5.0);
  EXPECT_EQ(sorted_quantile(v, 0.5), 3.0);
  EXPECT_NEAR(sorted_quantile(v, 0.1), 1.4, 1e-15);
}

// ---------------------------------------------------------------------------
// Kernel density

TEST(Kde, UniformSamplesGiveUniformDensity) {
  const PriorSpec box = fixture::unit_box(2, 0.0, 2.0);
  const KernelDensity kde = kde_fit(sample_prior(box, 10000, 4), box);
  EXPECT_FALSE(kde.any_degenerate());
  const double uniform = -std::log(4.0);
  for (int i = 0; i < 10; ++i) {
    const Vector x{{0.5 + 0.1 * i, 1.4 - 0.08 * i}};
    EXPECT_NEAR(kde.logpdf(x), uniform, 0.15) << i;
  }
  EXPECT_EQ(kde.logpdf(Vector{{2.5, 1.0}}), kNegInf);
}

TEST(Kde, SilvermanBandwidth) {
  const PriorSpec box = fixture::unit_box(1, -10.0, 10.0);
  Rng rng(3);
  std::normal_distribution<double> n;
  Matrix s(400, 1);
  for (Eigen::Index i = 0; i < 400; ++i) s(i, 0) = n(rng);
  const double m = s.col(0).mean();
  const double sd = std::sqrt((s.col(0).array() - m).square().sum() / 399.0);
  EXPECT_NEAR(kde_fit(s, box).bandwidths()[0], 1.06 * sd * std::pow(400.0, -0.2), 1e-12);
}

TEST(Kde, IdenticalSamplesFallBack) {
  const PriorSpec box = fixture::unit_box(2, 0.0, 1.0);
  Matrix s(20, 2);
  s.col(0).setConstant(0.4);
  s.col(1) = Vector::LinSpaced(20, 0.1, 0.9);
  const KernelDensity kde = kde_fit(s, box);
  EXPECT_TRUE(kde.any_degenerate());
  EXPECT_TRUE(kde.degenerate_dims()[0]);
  EXPECT_FALSE(kde.degenerate_dims()[1]);
  EXPECT_DOUBLE_EQ(kde.bandwidths()[0], 1e-6);
  EXPECT_TRUE(std::isfinite(kde.logpdf(Vector{{0.4, 0.5}})));
}

TEST(Kde, IntegratesToOneOverBox) {
  const PriorSpec box({{"a", Uniform{0, 1}}, {"b", Uniform{0, 3}}});
  Rng rng(8);
  std::normal_distribution<double> n;
  Matrix s(800, 2);
  for (Eigen::Index i = 0; i < 800; ++i) {
    s(i, 0) = std::clamp(0.1 + 0.15 * n(rng), 0.0, 1.0);
    s(i, 1) = std::clamp(2.0 + 0.6 * n(rng), 0.0, 3.0);
  }
  const KernelDensity kde = kde_fit(s, box);
  const int g = 150;
  double total = 0.0;
  for (int i = 0; i < g; ++i) {
    for (int j = 0; j < g; ++j) {
      const Vector x{{(i + 0.5) / g, 3.0 * (j + 0.5) / g}};
      total += std::exp(kde.logpdf(x)) * (3.0 / (g * g));
    }
  }
  EXPECT_NEAR(total, 1.0, 0.01);
}

TEST(Kde, SamplesStayInSupportAndFollowPoints) {
  const PriorSpec box = fixture::unit_box(2, 0.0, 1.0);
  Matrix pts(50, 2);
  pts.col(0).setConstant(0.02);
  pts.col(1) = Vector::LinSpaced(50, 0.6, 0.9);
  const KernelDensity kde = kde_fit(pts, box);
  const Matrix draws = kde.sample(5000, 1);
  EXPECT_GE(draws.minCoeff(), 0.0);
  EXPECT_LE(draws.maxCoeff(), 1.0);
  EXPECT_NEAR(draws.col(1).mean(), 0.75, 0.02);
}

TEST(Kde, StridedSubsetRespectsCap) {
  const PriorSpec box = fixture::unit_box(1, 0.0, 1.0);
  EXPECT_EQ(kde_fit(sample_prior(box, 5000, 1), box, 2000).points().rows(), 2000);
  EXPECT_EQ(kde_fit(sample_prior(box, 500, 1), box, 2000).points().rows(), 500);
}

// ---------------------------------------------------------------------------
// Stage updates

TEST(RunStage, ZeroInformationLikelihoodKeepsPrior) {
  const PriorSpec prior = pile_soil_prior();
  Matrix A(8, 3);
  A.setRandom();
  const PcaPceSurrogate s = fixture::affine_surrogate(prior, A, Vector::Ones(8));
  McmcConfig cfg;
  cfg.walkers = 16;
  cfg.steps = 3000;
  cfg.sigma2_fixed = 1e12;
  const StagePosterior post =
      run_stage(s, obs_of(Matrix::Ones(1, 8)), PriorDensity(prior), prior, cfg);
  for (std::size_t j = 0; j < 3; ++j) {
    const double mid = 0.5 * (prior.lower(j) + prior.upper(j));
    const double width = prior.upper(j) - prior.lower(j);
    EXPECT_LT(std::abs(post.mean[static_cast<Eigen::Index>(j)] - mid), 0.05 * width) << j;
  }
  EXPECT_EQ(post.post_samples.cols(), 4);
  EXPECT_EQ(post.post_samples.rows(), 900 * 16);
}

TEST(RunStage, ConjugateLinearGaussian) {
  const PriorSpec prior = fixture::unit_box(2);
  Matrix A(5, 2);
  A << 1.0, 0.2, -0.5, 1.0, 0.8, 0.8, 0.3, -1.2, 1.1, 0.0;
  const Vector b = Vector::LinSpaced(5, 0.5, 1.5);
  const PcaPceSurrogate s = fixture::affine_surrogate(prior, A, b);
  const Vector truth{{0.3, -0.4}};
  const double sigma2 = 0.01;
  McmcConfig cfg;
  cfg.walkers = 20;
  cfg.steps = 20000;
  cfg.sigma2_fixed = sigma2;
  cfg.seed = 5;
  const StagePosterior post = run_stage(s, obs_of((A * truth + b).transpose()), PriorDensity(prior), prior, cfg);

  const Matrix cov = sigma2 * (A.transpose() * A).inverse();
  const Vector mean = (A.transpose() * A).ldlt().solve(A.transpose() * A * truth);
  const Matrix X = post.post_samples.leftCols(2);
  const RowVector m = X.colwise().mean();
  const Matrix C = (X.rowwise() - m).transpose() * (X.rowwise() - m) / (X.rows() - 1.0);
  for (Eigen::Index j = 0; j < 2; ++j) EXPECT_NEAR(m[j] / mean[j], 1.0, 0.05);
  EXPECT_LT((C - cov).norm() / cov.norm(), 0.05);
  EXPECT_FALSE(post.short_chain);
  EXPECT_TRUE(prior.contains(post.x_map.x_m));
  EXPECT_EQ(post.x_map.sigma2, sigma2);
}

TEST(RunStage, PredictiveBandOrderedAndReproducible) {
  const PriorSpec prior = fixture::unit_box(2);
  Matrix A(4, 2);
  A << 1, 0, 0, 1, 1, 1, 1, -1;
  const PcaPceSurrogate s = fixture::affine_surrogate(prior, A, Vector::Constant(4, 2.0));
  McmcConfig cfg;
  cfg.walkers = 12;
  cfg.steps = 500;
  const ObservationSet obs = obs_of((A * Vector{{0.1, 0.2}} + Vector::Constant(4, 2.0)).transpose());
  const StagePosterior a = run_stage(s, obs, PriorDensity(prior), prior, cfg);
  const StagePosterior b = run_stage(s, obs, PriorDensity(prior), prior, cfg);
  EXPECT_TRUE((a.predictive.lo.array() <= a.predictive.hi.array()).all());
  EXPECT_EQ((a.post_samples - b.post_samples).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(a.post_samples.cols(), 3);
  EXPECT_GT(a.x_map.sigma2, 0.0);
  EXPECT_LE(a.x_map.sigma2, sigma2_prior_max(obs));
  EXPECT_GT(a.acceptance_rate, 0.0);
  EXPECT_LT(a.acceptance_rate, 1.0);
  EXPECT_EQ(a.autocorr_times.size(), 3);
  EXPECT_TRUE(a.short_chain);  // 500 steps is far too short for 50 autocorrelation times
}

TEST(RunStage, ConfigValidation) {
  const PriorSpec prior = fixture::unit_box(2);
  const PcaPceSurrogate s = fixture::constant_surrogate(prior, Vector::Ones(3));
  McmcConfig cfg;
  cfg.walkers = 5;
  EXPECT_EQ(code_of([&] { run_stage(s, obs_of(Matrix::Ones(1, 3)), PriorDensity(prior), prior, cfg); }),
            ErrorCode::ConfigInvalid);
  cfg = McmcConfig{};
  cfg.burn_in = 1.0;
  EXPECT_EQ(code_of([&] { cfg.validate(2); }), ErrorCode::ConfigInvalid);
}

TEST(RunSequence, SingleStageMatchesRunStage) {
  const PriorSpec prior = fixture::unit_box(2);
  Matrix A(4, 2);
  A << 1, 0, 0, 1, 1, 1, 1, -1;
  auto s = std::make_shared<const PcaPceSurrogate>(fixture::affine_surrogate(prior, A, Vector::Constant(4, 2.0)));
  McmcConfig cfg;
  cfg.walkers = 12;
  cfg.steps = 400;
  const ObservationSet obs = obs_of((A * Vector{{-0.3, 0.5}} + Vector::Constant(4, 2.0)).transpose());
  const SequenceResult seq = run_sequence({{s, obs}}, prior, cfg);
  const StagePosterior direct = run_stage(*s, obs, PriorDensity(prior), prior, cfg);
  ASSERT_EQ(seq.stages.size(), 1u);
  EXPECT_EQ((seq.stages[0].post_samples - direct.post_samples).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(seq.prior_predictive.size(), 1u);
  EXPECT_EQ(seq.cross.size(), 1u);
}

TEST(RunSequence, RepeatedDataContracts) {
  const PriorSpec prior = fixture::unit_box(2);
  Matrix A(6, 2);
  A << 1, 0.3, 0.2, 1, 0.5, 0.5, -0.4, 1, 1, -0.2, 0.1, 0.1;
  const Vector b = Vector::Constant(6, 1.0);
  auto s = std::make_shared<const PcaPceSurrogate>(fixture::affine_surrogate(prior, A, b));
  const ObservationSet obs = obs_of((A * Vector{{0.2, -0.1}} + b).transpose());
  McmcConfig cfg;
  cfg.walkers = 16;
  cfg.steps = 4000;
  cfg.sigma2_fixed = 0.05;
  const SequenceResult seq = run_sequence({{s, obs}, {s, obs}}, prior, cfg);
  ASSERT_EQ(seq.stages.size(), 2u);
  for (Eigen::Index j = 0; j < 2; ++j) EXPECT_LE(seq.stages[1].stddev[j], seq.stages[0].stddev[j]) << j;
  EXPECT_EQ(seq.cross.size(), 2u);
  EXPECT_EQ(seq.cross[0].size(), 2u);
  EXPECT_NE(seq.stages[0].seed, seq.stages[1].seed);
}

TEST(RunSequence, StageOrderConsistency) {
  const PriorSpec prior = fixture::unit_box(2);
  Matrix A1(5, 2), A2(5, 2);
  A1 << 1, 0.2, 0.5, 1, 0.8, 0.8, 0.3, -0.2, 1.1, 0.0;
  A2 << 0.4, 1.0, -1.0, 0.5, 0.2, 0.9, 1.2, 0.3, 0.0, 0.7;
  const Vector b = Vector::Zero(5);
  const Vector truth{{0.25, -0.35}};
  auto s1 = std::make_shared<const PcaPceSurrogate>(fixture::affine_surrogate(prior, A1, b));
  auto s2 = std::make_shared<const PcaPceSurrogate>(fixture::affine_surrogate(prior, A2, b));
  Rng rng(4);
  std::normal_distribution<double> n(0.0, 0.05);
  Vector y1 = A1 * truth, y2 = A2 * truth;
  for (Eigen::Index i = 0; i < 5; ++i) {
    y1[i] += n(rng);
    y2[i] += n(rng);
  }
  const ObservationSet o1 = obs_of(y1.transpose(), 1);
  const ObservationSet o2 = obs_of(y2.transpose(), 2);
  McmcConfig cfg;
  cfg.walkers = 16;
  cfg.steps = 4000;
  cfg.sigma2_fixed = 0.0025;
  const SequenceResult fwd = run_sequence({{s1, o1}, {s2, o2}}, prior, cfg);
  const SequenceResult rev = run_sequence({{s2, o2}, {s1, o1}}, prior, cfg);
  auto inside = [](const Vector& x, const StagePosterior& p) {
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      std::vector<double> col(p.post_samples.col(j).data(), p.post_samples.col(j).data() + p.post_samples.rows());
      std::sort(col.begin(), col.end());
      if (x[j] < sorted_quantile(col, 0.005) || x[j] > sorted_quantile(col, 0.995)) return false;
    }
    return true;
  };
  EXPECT_TRUE(inside(fwd.stages[1].x_map.x_m, rev.stages[1]));
  EXPECT_TRUE(inside(rev.stages[1].x_map.x_m, fwd.stages[1]));
}
