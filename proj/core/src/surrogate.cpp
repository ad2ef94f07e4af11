#include "pcapce/surrogate.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "pcapce/error.hpp"
#include "pcapce/serialization.hpp"

namespace pcapce {

std::string_view to_string(SurrogateMode mode) {
  return mode == SurrogateMode::PcaPce ? "pca-pce" : "pointwise-pce";
}

SurrogateMode surrogate_mode_from_string(std::string_view s) {
  if (s == "pca-pce") return SurrogateMode::PcaPce;
  if (s == "pointwise-pce") return SurrogateMode::PointwisePce;
  throw Error(ErrorCode::InvalidArgument, "unknown surrogate mode '" + std::string(s) + "'");
}

Eigen::Index PcaPceSurrogate::n_output() const {
  return basis ? basis->n_output() : static_cast<Eigen::Index>(components.size());
}

Vector PcaPceSurrogate::component_values(const Eigen::Ref<const Vector>& x) const {
  Vector v(static_cast<Eigen::Index>(components.size()));
  for (std::size_t i = 0; i < components.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = eval_pce(components[i], x);
  }
  return v;
}

Vector PcaPceSurrogate::predict(const Eigen::Ref<const Vector>& x) const {
  if (mode == SurrogateMode::PointwisePce) return component_values(x);
  const Matrix scores = component_values(x).transpose();
  return reconstruct(*basis, scores).row(0).transpose();
}

Matrix PcaPceSurrogate::predict_many(const Matrix& X) const {
  Matrix values(X.rows(), static_cast<Eigen::Index>(components.size()));
  for (Eigen::Index k = 0; k < X.rows(); ++k) {
    values.row(k) = component_values(X.row(k).transpose()).transpose();
  }
  if (mode == SurrogateMode::PointwisePce) return values;
  return reconstruct(*basis, values);
}

PcaPceSurrogate train(const Matrix& X, const Matrix& Y, const PriorSpec& prior,
                      const SurrogateConfig& config) {
  if (X.rows() != Y.rows()) throw Error(ErrorCode::DimensionMismatch, "train: X and Y row counts differ");
  if (static_cast<std::size_t>(X.cols()) != prior.dimension()) {
    throw Error(ErrorCode::DimensionMismatch, "train: X columns do not match the prior");
  }
  if (X.rows() < 3) throw Error(ErrorCode::InsufficientSamples, "train needs at least 3 runs");

  PcaPceSurrogate s;
  s.mode = config.mode;
  s.prior = prior;
  s.meta.training_K = static_cast<std::size_t>(X.rows());
  s.meta.epsilon_dr = config.epsilon_dr;

  Matrix targets;
  if (config.mode == SurrogateMode::PcaPce) {
    PcaBasis basis = fit_pca(Y);
    const Eigen::Index kept = select_components(basis.eigenvalues, config.epsilon_dr);
    basis = with_retained(std::move(basis), kept);
    targets = project(basis, Y);
    s.meta.explained_variance = basis.eigenvalues.head(kept).sum() / basis.eigenvalues.sum();
    s.meta.pca_error = reconstruction_error(Y, reconstruct(basis, targets));
    s.basis = std::move(basis);
  } else {
    // Outputs that never vary still get a (constant) model; only the whole
    // ensemble being flat is an error.
    const double spread = (Y.rowwise() - Y.colwise().mean()).squaredNorm();
    if (!(spread > 0.0)) throw Error(ErrorCode::DegenerateData, "output ensemble has no variance");
    targets = Y;
    s.meta.pca_error = 0.0;
  }

  s.components.reserve(static_cast<std::size_t>(targets.cols()));
  for (Eigen::Index i = 0; i < targets.cols(); ++i) {
    s.components.push_back(adapt_degree(X, targets.col(i), prior, config.pce));
  }
  s.meta.surrogate_error = reconstruction_error(Y, s.predict_many(X));
  return s;
}

ValidationReport mape(const Matrix& Y_test, const Matrix& Y_pred) {
  if (Y_test.rows() != Y_pred.rows() || Y_test.cols() != Y_pred.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "mape: shape mismatch");
  }
  if (Y_test.rows() < 1) throw Error(ErrorCode::InsufficientSamples, "mape needs a test run");
  const double floor = 1e-3 * Y_test.cwiseAbs().maxCoeff();
  const Matrix rel =
      ((Y_test - Y_pred).array().abs() / (Y_test.array().abs() + floor)).matrix();
  ValidationReport r;
  r.n_test = static_cast<std::size_t>(Y_test.rows());
  r.per_point_mape = 100.0 * rel.colwise().mean().transpose();
  r.mape = 100.0 * rel.mean();
  return r;
}

ValidationReport mape(const PcaPceSurrogate& s, const Matrix& X_test, const Matrix& Y_test) {
  if (Y_test.cols() != s.n_output() || X_test.rows() != Y_test.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "mape: test set does not match the surrogate");
  }
  return mape(Y_test, s.predict_many(X_test));
}

void save(const PcaPceSurrogate& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << to_json(s).dump(1) << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

PcaPceSurrogate load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaInvalid, path.string() + ": " + e.what());
  }
  return surrogate_from_json(j);
}

}  // namespace pcapce
