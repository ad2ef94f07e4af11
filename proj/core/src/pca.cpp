#include "pcapce/pca.hpp"

#include <algorithm>
#include <cmath>

#include "pcapce/error.hpp"

namespace pcapce {
namespace {

void fix_signs(Matrix& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    auto col = vectors.col(c);
    const double peak = col.cwiseAbs().maxCoeff();
    if (peak == 0.0) continue;
    // First entry within rounding of the peak magnitude decides, so near-ties
    // (e.g. (1, -1)/sqrt(2)) resolve the same way on every run.
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      if (std::abs(col[i]) >= peak * (1.0 - 1e-8)) {
        if (col[i] < 0.0) col = -col;
        break;
      }
    }
  }
}

// Completes k orthonormal columns to an orthonormal basis of R^n.
Matrix complete_basis(const Matrix& partial, Eigen::Index n) {
  Matrix out(n, n);
  const Eigen::Index k = partial.cols();
  out.leftCols(k) = partial;
  if (k == n) return out;
  Eigen::HouseholderQR<Matrix> qr(partial);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  out.rightCols(n - k) = q.rightCols(n - k);
  return out;
}

}  // namespace

PcaBasis fit_pca(const Matrix& Y) {
  const Eigen::Index K = Y.rows();
  const Eigen::Index N = Y.cols();
  if (K < 2) throw Error(ErrorCode::InsufficientSamples, "fit_pca needs at least 2 rows");
  if (N < 1) throw Error(ErrorCode::DimensionMismatch, "fit_pca needs at least 1 column");

  PcaBasis b;
  b.mean = Y.colwise().mean().transpose();
  const Matrix centered = Y.rowwise() - b.mean.transpose();
  const double total_variance = centered.squaredNorm() / static_cast<double>(K - 1);
  const double scale = b.mean.squaredNorm();
  if (!(total_variance > 0.0) || total_variance < 1e-14 * scale) {
    throw Error(ErrorCode::DegenerateData, "output ensemble has no variance");
  }

  Vector values;
  Matrix vectors;
  if (N <= 4 * K) {
    const Matrix cov = centered.transpose() * centered / static_cast<double>(K - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    values = eig.eigenvalues().reverse();
    vectors = eig.eigenvectors().rowwise().reverse();
  } else {
    // Gram-matrix route: the non-zero spectrum of C^T C equals that of C C^T.
    const Matrix gram = centered * centered.transpose() / static_cast<double>(K - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    const Vector gvals = eig.eigenvalues().reverse();
    const Matrix gvecs = eig.eigenvectors().rowwise().reverse();
    const double cutoff = 1e-12 * gvals[0];
    Eigen::Index rank = 0;
    while (rank < K && gvals[rank] > cutoff) ++rank;
    Matrix lifted(N, rank);
    for (Eigen::Index i = 0; i < rank; ++i) {
      lifted.col(i) = centered.transpose() * gvecs.col(i);
      lifted.col(i).normalize();
    }
    vectors = complete_basis(lifted, N);
    values = Vector::Zero(N);
    values.head(rank) = gvals.head(rank);
  }
  values = values.cwiseMax(0.0);
  fix_signs(vectors);
  b.eigenvalues = std::move(values);
  b.eigenvectors = std::move(vectors);
  b.retained = N;
  return b;
}

Eigen::Index select_components(const Vector& eigenvalues, double epsilon_dr) {
  if (!(epsilon_dr > 0.0 && epsilon_dr < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "epsilon_dr must lie in (0, 1)");
  }
  if (eigenvalues.size() == 0) throw Error(ErrorCode::InvalidArgument, "no eigenvalues");
  const double total = eigenvalues.sum();
  const double target = (1.0 - epsilon_dr) * total;
  double cumulative = 0.0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    cumulative += eigenvalues[i];
    if (cumulative >= target) return std::max<Eigen::Index>(i + 1, 1);
  }
  return eigenvalues.size();
}

PcaBasis with_retained(PcaBasis basis, Eigen::Index n_retained) {
  if (n_retained < 1 || n_retained > basis.eigenvectors.cols()) {
    throw Error(ErrorCode::InvalidArgument, "retained count out of range");
  }
  basis.retained = n_retained;
  return basis;
}

Matrix project(const PcaBasis& basis, const Matrix& Y) {
  if (Y.cols() != basis.n_output()) {
    throw Error(ErrorCode::DimensionMismatch, "project: expected " +
                                                  std::to_string(basis.n_output()) + " columns");
  }
  return (Y.rowwise() - basis.mean.transpose()) * basis.retained_vectors();
}

Matrix reconstruct(const PcaBasis& basis, const Matrix& Z) {
  if (Z.cols() != basis.retained) {
    throw Error(ErrorCode::DimensionMismatch, "reconstruct: expected " +
                                                  std::to_string(basis.retained) + " score columns");
  }
  Matrix out = Z * basis.retained_vectors().transpose();
  out.rowwise() += basis.mean.transpose();
  return out;
}

double reconstruction_error(const Matrix& Y, const Matrix& Y_re) {
  if (Y.rows() != Y_re.rows() || Y.cols() != Y_re.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "reconstruction_error: shape mismatch");
  }
  const RowVector mu = Y.colwise().mean();
  const double denom = (Y.rowwise() - mu).squaredNorm();
  if (denom == 0.0) throw Error(ErrorCode::DegenerateData, "reconstruction_error: zero variance");
  return (Y - Y_re).squaredNorm() / denom;
}

}  // namespace pcapce
