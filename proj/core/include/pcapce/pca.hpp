#pragma once

#include "pcapce/types.hpp"

namespace pcapce {

/// Principal-component basis of an output ensemble.
///
/// `eigenvectors` holds one orthonormal column per principal direction, in
/// the same order as `eigenvalues` (descending). A freshly fitted basis keeps
/// all N columns; a basis loaded from disk keeps only the retained ones.
struct PcaBasis {
  Vector mean;
  Vector eigenvalues;
  Matrix eigenvectors;
  Eigen::Index retained = 0;

  Eigen::Index n_output() const { return mean.size(); }
  /// The N x N' matrix of retained directions.
  auto retained_vectors() const { return eigenvectors.leftCols(retained); }
};

/// Mean (divisor K), covariance (divisor K-1) and descending eigenpairs of the
/// rows of Y. Each eigenvector's largest-magnitude entry is positive. `retained`
/// is initialised to N.
PcaBasis fit_pca(const Matrix& Y);

/// Smallest N' whose leading eigenvalues explain at least (1 - epsilon_dr) of
/// the total variance; never less than 1.
Eigen::Index select_components(const Vector& eigenvalues, double epsilon_dr);

/// Returns a copy of `basis` truncated to the first `n_retained` directions.
PcaBasis with_retained(PcaBasis basis, Eigen::Index n_retained);

/// Scores Z = (Y - 1 mu^T) Phi_{N'}.
Matrix project(const PcaBasis& basis, const Matrix& Y);

/// Y = 1 mu^T + Z Phi_{N'}^T.
Matrix reconstruct(const PcaBasis& basis, const Matrix& Z);

/// ||Y - Y_re||_F^2 / ||Y - 1 mean(Y)^T||_F^2.
double reconstruction_error(const Matrix& Y, const Matrix& Y_re);

}  // namespace pcapce
