#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "pcapce/doe.hpp"
#include "pcapce/error.hpp"
#include "pcapce/forward.hpp"
#include "pcapce/serialization.hpp"
#include "pcapce/surrogate.hpp"

using namespace pcapce;
namespace fs = std::filesystem;

namespace {

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

// Rank-one ensemble: y(x) = m + t(x) v with t affine in x.
struct RankOne {
  PriorSpec prior = pile_soil_prior();
  Vector m = Vector::LinSpaced(20, 0.01, 0.002);
  Vector v = Vector::LinSpaced(20, 1.0, -0.2).normalized();

  double t(const Vector& x) const { return 1e-6 * x[0] - 0.3 * x[1] + 0.002 * x[2]; }
  Vector y(const Vector& x) const { return m + t(x) * v; }
  Matrix ys(const Matrix& X) const {
    Matrix Y(X.rows(), m.size());
    for (Eigen::Index k = 0; k < X.rows(); ++k) Y.row(k) = y(X.row(k).transpose()).transpose();
    return Y;
  }
};

Matrix smooth_ensemble(const Matrix& X) {
  Matrix Y(X.rows(), 30);
  for (Eigen::Index k = 0; k < X.rows(); ++k) {
    const double a = X(k, 0) / 1e5, b = X(k, 1), c = X(k, 2) / 30.0;
    for (Eigen::Index n = 0; n < 30; ++n) {
      const double s = n / 29.0;
      Y(k, n) = std::exp(-a * s) * (1 + 0.1 * b * s) + 0.05 * c * s * s;
    }
  }
  return Y;
}

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("pcapce_test_" + name);
}

}  // namespace

TEST(Train, FlatEnsembleIsDegenerate) {
  const Matrix X = scale_to_prior(latin_hypercube(6, 3, 1), pile_soil_prior()).rows;
  Matrix Y(6, 5);
  Y.rowwise() = RowVector::LinSpaced(5, 1.0, 2.0);
  EXPECT_EQ(code_of([&] { train(X, Y, pile_soil_prior(), {}); }), ErrorCode::DegenerateData);
  SurrogateConfig pw;
  pw.mode = SurrogateMode::PointwisePce;
  EXPECT_EQ(code_of([&] { train(X, Y, pile_soil_prior(), pw); }), ErrorCode::DegenerateData);
}

TEST(Train, InputChecks) {
  const Matrix X = scale_to_prior(latin_hypercube(2, 3, 1), pile_soil_prior()).rows;
  EXPECT_EQ(code_of([&] { train(X, Matrix::Random(2, 4), pile_soil_prior(), {}); }),
            ErrorCode::InsufficientSamples);
  EXPECT_EQ(code_of([&] { train(X, Matrix::Random(3, 4), pile_soil_prior(), {}); }),
            ErrorCode::DimensionMismatch);
}

TEST(Train, RankOneLinearTruthIsExact) {
  const RankOne truth;
  const Matrix X = scale_to_prior(latin_hypercube(14, 3, 3), truth.prior).rows;
  const PcaPceSurrogate s = train(X, truth.ys(X), truth.prior, {});
  ASSERT_TRUE(s.basis.has_value());
  EXPECT_EQ(s.basis->retained, 1);
  ASSERT_EQ(s.components.size(), 1u);
  EXPECT_EQ(s.components[0].degree(), 1);
  const Matrix T = sample_prior(truth.prior, 20, 99);
  for (Eigen::Index i = 0; i < T.rows(); ++i) {
    const Vector x = T.row(i).transpose();
    const Vector expected = truth.y(x);
    EXPECT_LE((s.predict(x) - expected).cwiseAbs().maxCoeff(), 1e-8 * expected.cwiseAbs().maxCoeff());
    EXPECT_LE((s.predict(x) - expected).norm(), 1e-6 * expected.norm());
  }
}

TEST(Predict, ZeroComponentsGiveMean) {
  const RankOne truth;
  const Matrix X = scale_to_prior(latin_hypercube(10, 3, 4), truth.prior).rows;
  PcaPceSurrogate s = train(X, truth.ys(X), truth.prior, {});
  for (auto& c : s.components) c.coefficients.setZero();
  const Vector x = X.row(0).transpose();
  EXPECT_EQ((s.predict(x) - s.basis->mean).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Predict, EqualsReconstructionOfComponentValues) {
  const PriorSpec prior = pile_soil_prior();
  const Matrix X = scale_to_prior(latin_hypercube(14, 3, 8), prior).rows;
  SurrogateConfig cfg;
  cfg.epsilon_dr = 1e-6;
  const PcaPceSurrogate s = train(X, smooth_ensemble(X), prior, cfg);
  EXPECT_GT(s.basis->retained, 1);
  const Matrix T = sample_prior(prior, 10, 3);
  const Matrix batch = s.predict_many(T);
  for (Eigen::Index i = 0; i < T.rows(); ++i) {
    const Vector x = T.row(i).transpose();
    const Matrix scores = s.component_values(x).transpose();
    const Vector direct = reconstruct(*s.basis, scores).row(0).transpose();
    EXPECT_EQ((s.predict(x) - direct).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ((batch.row(i).transpose() - direct).cwiseAbs().maxCoeff(), 0.0);
  }
  Vector outside = T.row(0).transpose();
  outside[2] = 60.0;
  EXPECT_EQ(code_of([&] { s.predict(outside); }), ErrorCode::OutOfSupport);
}

TEST(Train, ErrorDecompositionAndPassthrough) {
  const PriorSpec prior = pile_soil_prior();
  const Matrix X = scale_to_prior(latin_hypercube(14, 3, 12), prior).rows;
  const Matrix Y = smooth_ensemble(X);
  const PcaPceSurrogate s = train(X, Y, prior, {});
  EXPECT_GE(s.meta.surrogate_error + 1e-15, s.meta.pca_error);

  // Exact component fits: training predictions equal PCA reconstructions.
  const RankOne truth;
  const Matrix Xr = scale_to_prior(latin_hypercube(12, 3, 2), truth.prior).rows;
  const Matrix Yr = truth.ys(Xr);
  const PcaPceSurrogate r = train(Xr, Yr, truth.prior, {});
  const Matrix pca_only = reconstruct(*r.basis, project(*r.basis, Yr));
  EXPECT_LE((r.predict_many(Xr) - pca_only).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Train, PointwiseModeHasOneModelPerOutput) {
  const PriorSpec prior = pile_soil_prior();
  const Matrix X = scale_to_prior(latin_hypercube(14, 3, 5), prior).rows;
  const Matrix Y = smooth_ensemble(X);
  SurrogateConfig cfg;
  cfg.mode = SurrogateMode::PointwisePce;
  const PcaPceSurrogate s = train(X, Y, prior, cfg);
  EXPECT_FALSE(s.basis.has_value());
  EXPECT_EQ(s.components.size(), 30u);
  EXPECT_EQ(s.n_output(), 30);
  const Vector x = X.row(3).transpose();
  const Vector p = s.predict(x);
  for (Eigen::Index n = 0; n < 30; ++n) EXPECT_EQ(p[n], eval_pce(s.components[static_cast<std::size_t>(n)], x));
}

TEST(Mape, HandExamples) {
  const Matrix Y = Matrix::Random(4, 6).array() + 2.0;
  EXPECT_EQ(mape(Y, Y).mape, 0.0);
  const ValidationReport r = mape(Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 1.9));
  EXPECT_NEAR(r.mape, 100.0 * 0.1 / (2.0 + 2e-3), 1e-12);
  EXPECT_NEAR(r.mape, 5.0, 0.01);
  const Matrix P = Y + 0.1 * Matrix::Random(4, 6);
  EXPECT_NEAR(mape(2.0 * Y, 2.0 * P).mape, mape(Y, P).mape, 1e-6);
  EXPECT_EQ(mape(Y, P).per_point_mape.size(), 6);
  EXPECT_NEAR(mape(Y, P).per_point_mape.mean(), mape(Y, P).mape, 1e-12);
  EXPECT_EQ(code_of([&] { mape(Y, Matrix::Zero(4, 5)); }), ErrorCode::DimensionMismatch);
}

TEST(Persistence, RoundTripIsBitExact) {
  const PriorSpec prior = pile_soil_prior();
  const Matrix X = scale_to_prior(latin_hypercube(14, 3, 21), prior).rows;
  for (SurrogateMode mode : {SurrogateMode::PcaPce, SurrogateMode::PointwisePce}) {
    SurrogateConfig cfg;
    cfg.mode = mode;
    cfg.epsilon_dr = 1e-4;
    const PcaPceSurrogate s = train(X, smooth_ensemble(X), prior, cfg);
    const fs::path path = temp_file(std::string(to_string(mode)) + ".json");
    save(s, path);
    const PcaPceSurrogate back = load(path);
    EXPECT_EQ(back.mode, mode);
    EXPECT_EQ(back.meta.training_K, 14u);
    const Matrix T = sample_prior(prior, 10, 4);
    EXPECT_EQ((s.predict_many(T) - back.predict_many(T)).cwiseAbs().maxCoeff(), 0.0);
    const auto j = nlohmann::json::parse(std::ifstream(path));
    for (const char* key : {"format_version", "prior", "pca", "components", "training_meta", "mode"}) {
      EXPECT_TRUE(j.contains(key)) << key;
    }
    fs::remove(path);
  }
}

TEST(Persistence, VersionAndSchemaErrors) {
  const PriorSpec prior = pile_soil_prior();
  const Matrix X = scale_to_prior(latin_hypercube(8, 3, 2), prior).rows;
  const PcaPceSurrogate s = train(X, smooth_ensemble(X), prior, {});
  auto j = to_json(s);
  j["format_version"] = 99;
  const fs::path bad_version = temp_file("version.json");
  std::ofstream(bad_version) << j.dump();
  EXPECT_EQ(code_of([&] { load(bad_version); }), ErrorCode::VersionMismatch);

  const fs::path truncated = temp_file("truncated.json");
  const std::string full = to_json(s).dump();
  std::ofstream(truncated) << full.substr(0, full.size() / 2);
  EXPECT_EQ(code_of([&] { load(truncated); }), ErrorCode::SchemaInvalid);

  EXPECT_EQ(code_of([&] { load(temp_file("does_not_exist.json")); }), ErrorCode::IoFailure);
  fs::remove(bad_version);
  fs::remove(truncated);
}

TEST(PileSurrogate, FourteenRunsKeepOneComponent) {
  const PriorSpec prior = pile_soil_prior();
  const PileConfig pile;
  const DesignMatrix d = scale_to_prior(latin_hypercube(14, 3, 2024), prior);
  const EnsembleResult ens = run_ensemble(d.rows, 0.02, pile);
  const PcaPceSurrogate s = train(d.rows, ens.profiles, prior, {});
  EXPECT_EQ(s.basis->retained, 1);
  EXPECT_GE(s.meta.explained_variance, 0.98);
}
