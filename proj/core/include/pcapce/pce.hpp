#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "pcapce/doe.hpp"
#include "pcapce/types.hpp"

namespace pcapce {

/// psi_k(u) = sqrt(2k+1) P_k(u); orthonormal under the Uniform(-1, 1) density.
double legendre_orthonormal(int k, double u);

/// Writes psi_0(u) .. psi_{out.size()-1}(u) into `out`.
void legendre_orthonormal_all(double u, std::span<double> out);

using MultiIndex = std::vector<int>;

/// Truncated set of multi-indices with (sum_j a_j^q)^(1/q) <= p, ordered by
/// total degree and then by descending lexicographic order, so the zero tuple
/// comes first and (1,0,0) precedes (0,1,0).
struct MultiIndexSet {
  std::vector<MultiIndex> indices;
  std::size_t dimension = 0;
  int max_degree = 0;
  double q_norm = 1.0;

  std::size_t size() const { return indices.size(); }
};

MultiIndexSet gen_multi_indices(std::size_t M, int p, double q);

/// K x |A| matrix of multivariate basis values at the rows of X.
Matrix design_matrix(const Matrix& X, const PriorSpec& prior, const MultiIndexSet& A);

/// Least squares via column-pivoted QR. Throws RankDeficient when the
/// 2-norm condition number exceeds 1e12 or when Psi has fewer rows than columns.
Vector fit_ols(const Matrix& Psi, const Vector& z);

/// Analytic leave-one-out error normalised by the sample variance of z.
/// +inf when any leverage is within 1e-12 of one.
double loo_error(const Matrix& Psi, const Vector& z, const Vector& c);

struct LarsFit {
  std::vector<bool> active;  // aligned with Psi columns
  Vector coefficients;       // zero where inactive
  double loo_error = 0.0;
  std::vector<Eigen::Index> path;  // non-constant columns in order of entry
};

/// Hybrid LARS: least-angle regression orders the columns, every prefix of
/// the path is refit by OLS, and the prefix with the lowest LOO error wins.
/// Columns of Psi that are constant act as the intercept and are always
/// active. The active set never exceeds min(max_terms, K - 1).
LarsFit fit_lars(const Matrix& Psi, const Vector& z, std::size_t max_terms);

struct PceModel {
  MultiIndexSet index_set;
  Vector coefficients;
  std::vector<bool> active;
  PriorSpec input_spec;
  double loo_error = 0.0;

  int degree() const { return index_set.max_degree; }
  std::size_t n_active() const;
  /// Mean of the expansion under the input distribution (the constant term).
  double mean() const;
  /// Variance under the input distribution (sum of squared non-constant terms).
  double variance() const;
};

double eval_pce(const PceModel& model, const Eigen::Ref<const Vector>& x);
Vector eval_pce_many(const PceModel& model, const Matrix& X);

struct PceConfig {
  std::vector<int> degrees{1, 2, 3, 4, 5, 6};
  double q_norm = 0.75;
  std::size_t max_terms = 0;  // 0: no limit beyond K - 1
};

struct DegreeTrial {
  int degree = 0;
  double loo_error = 0.0;
  std::optional<PceModel> model;  // empty when the fit failed
};

/// Fits one sparse model per candidate degree.
std::vector<DegreeTrial> sweep_degrees(const Matrix& X, const Vector& z, const PriorSpec& prior,
                                       const PceConfig& config);

/// Model with the smallest finite LOO error across candidate degrees; ties go
/// to the smaller degree.
PceModel adapt_degree(const Matrix& X, const Vector& z, const PriorSpec& prior,
                      const PceConfig& config);

/// Picks the winner from an existing sweep. Throws AllModelsDegenerate.
PceModel select_degree(std::vector<DegreeTrial> trials);

}  // namespace pcapce
