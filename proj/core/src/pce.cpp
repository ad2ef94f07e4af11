#include "pcapce/pce.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pcapce/error.hpp"

namespace pcapce {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kConditionLimit = 1e12;

// Two LOO values closer than this are treated as equal when choosing models.
bool loo_tie(double a, double b) {
  return std::abs(a - b) <= 1e-12 + 1e-9 * std::min(a, b);
}

void enumerate(std::size_t M, int p, MultiIndex& current, std::size_t pos,
               std::vector<MultiIndex>& out) {
  if (pos == M) {
    out.push_back(current);
    return;
  }
  for (int a = 0; a <= p; ++a) {
    current[pos] = a;
    enumerate(M, p, current, pos + 1, out);
  }
}

bool within_q_norm(const MultiIndex& a, int p, double q) {
  double s = 0.0;
  for (int v : a) s += std::pow(static_cast<double>(v), q);
  return std::pow(s, 1.0 / q) <= static_cast<double>(p) * (1.0 + 1e-12);
}

bool is_constant_column(const Eigen::Ref<const Vector>& col) {
  const double first = col[0];
  if (first == 0.0) return false;
  return (col.array() - first).abs().maxCoeff() <= 1e-12 * std::abs(first);
}

}  // namespace

double legendre_orthonormal(int k, double u) {
  if (k < 0) throw Error(ErrorCode::InvalidArgument, "polynomial degree must be >= 0");
  if (k == 0) return 1.0;
  double prev = 1.0;
  double cur = u;
  for (int n = 1; n < k; ++n) {
    const double next = ((2.0 * n + 1.0) * u * cur - n * prev) / (n + 1.0);
    prev = cur;
    cur = next;
  }
  return std::sqrt(2.0 * k + 1.0) * cur;
}

void legendre_orthonormal_all(double u, std::span<double> out) {
  if (out.empty()) return;
  double prev = 1.0;
  double cur = u;
  out[0] = 1.0;
  if (out.size() > 1) out[1] = std::sqrt(3.0) * u;
  for (std::size_t n = 1; n + 1 < out.size(); ++n) {
    const double dn = static_cast<double>(n);
    const double next = ((2.0 * dn + 1.0) * u * cur - dn * prev) / (dn + 1.0);
    prev = cur;
    cur = next;
    out[n + 1] = std::sqrt(2.0 * (dn + 1.0) + 1.0) * cur;
  }
}

MultiIndexSet gen_multi_indices(std::size_t M, int p, double q) {
  if (M == 0) throw Error(ErrorCode::InvalidArgument, "multi-index dimension must be >= 1");
  if (p < 0) throw Error(ErrorCode::InvalidArgument, "degree must be >= 0");
  if (!(q > 0.0 && q <= 1.0)) throw Error(ErrorCode::InvalidArgument, "q-norm must be in (0, 1]");

  std::vector<MultiIndex> all;
  MultiIndex current(M, 0);
  enumerate(M, p, current, 0, all);

  MultiIndexSet set;
  set.dimension = M;
  set.max_degree = p;
  set.q_norm = q;
  for (auto& a : all) {
    if (within_q_norm(a, p, q)) set.indices.push_back(std::move(a));
  }
  std::sort(set.indices.begin(), set.indices.end(), [](const MultiIndex& a, const MultiIndex& b) {
    const int da = std::accumulate(a.begin(), a.end(), 0);
    const int db = std::accumulate(b.begin(), b.end(), 0);
    if (da != db) return da < db;
    return a > b;
  });
  return set;
}

Matrix design_matrix(const Matrix& X, const PriorSpec& prior, const MultiIndexSet& A) {
  const auto M = static_cast<Eigen::Index>(prior.dimension());
  if (X.cols() != M || A.dimension != prior.dimension()) {
    throw Error(ErrorCode::DimensionMismatch, "design_matrix: input dimension mismatch");
  }
  const int p = A.max_degree;
  Matrix Psi(X.rows(), static_cast<Eigen::Index>(A.size()));
  std::vector<double> table(static_cast<std::size_t>(M) * (p + 1));
  for (Eigen::Index k = 0; k < X.rows(); ++k) {
    for (Eigen::Index j = 0; j < M; ++j) {
      if (!(X(k, j) >= prior.lower(j) && X(k, j) <= prior.upper(j))) {
        throw Error(ErrorCode::OutOfSupport, "design_matrix: row " + std::to_string(k) +
                                                 " input " + prior[j].name + " outside support");
      }
      legendre_orthonormal_all(prior.to_reference(j, X(k, j)),
                               std::span(table).subspan(j * (p + 1), p + 1));
    }
    for (std::size_t a = 0; a < A.size(); ++a) {
      double v = 1.0;
      for (Eigen::Index j = 0; j < M; ++j) v *= table[j * (p + 1) + A.indices[a][j]];
      Psi(k, static_cast<Eigen::Index>(a)) = v;
    }
  }
  return Psi;
}

Vector fit_ols(const Matrix& Psi, const Vector& z) {
  if (Psi.rows() != z.size()) throw Error(ErrorCode::DimensionMismatch, "fit_ols: row mismatch");
  if (Psi.rows() < Psi.cols()) {
    throw Error(ErrorCode::RankDeficient, "fit_ols: fewer samples than basis functions");
  }
  const Vector sv = Eigen::JacobiSVD<Matrix>(Psi).singularValues();
  if (sv.size() == 0 || !(sv[sv.size() - 1] > 0.0) ||
      sv[0] / sv[sv.size() - 1] > kConditionLimit) {
    throw Error(ErrorCode::RankDeficient, "fit_ols: condition number above 1e12");
  }
  return Eigen::ColPivHouseholderQR<Matrix>(Psi).solve(z);
}

double loo_error(const Matrix& Psi, const Vector& z, const Vector& c) {
  const Eigen::Index K = Psi.rows();
  const Eigen::Index B = Psi.cols();
  if (z.size() != K || c.size() != B) throw Error(ErrorCode::DimensionMismatch, "loo_error");
  if (K < 2) throw Error(ErrorCode::InsufficientSamples, "loo_error needs K >= 2");

  const Vector residual = z - Psi * c;
  const double var = (z.array() - z.mean()).square().sum() / static_cast<double>(K - 1);
  if (var == 0.0) {
    const double scale = std::max(1.0, z.cwiseAbs().maxCoeff());
    if (residual.cwiseAbs().maxCoeff() <= 1e-12 * scale) return 0.0;
    throw Error(ErrorCode::DegenerateTarget, "loo_error: constant target with nonzero residual");
  }

  Eigen::HouseholderQR<Matrix> qr(Psi);
  const Matrix Q = qr.householderQ() * Matrix::Identity(K, B);
  const Vector leverage = Q.rowwise().squaredNorm();
  double sum = 0.0;
  for (Eigen::Index k = 0; k < K; ++k) {
    const double slack = 1.0 - leverage[k];
    if (slack <= 1e-12) return kInf;
    const double deleted = residual[k] / slack;
    sum += deleted * deleted;
  }
  return sum / static_cast<double>(K) / var;
}

LarsFit fit_lars(const Matrix& Psi, const Vector& z, std::size_t max_terms) {
  const Eigen::Index K = Psi.rows();
  const Eigen::Index B = Psi.cols();
  if (z.size() != K) throw Error(ErrorCode::DimensionMismatch, "fit_lars: row mismatch");
  if (K < 2) throw Error(ErrorCode::InsufficientSamples, "fit_lars needs K >= 2");
  if (max_terms == 0) max_terms = static_cast<std::size_t>(B);

  std::vector<Eigen::Index> intercept;
  std::vector<Eigen::Index> candidates;
  for (Eigen::Index j = 0; j < B; ++j) {
    if (intercept.empty() && is_constant_column(Psi.col(j))) {
      intercept.push_back(j);
    } else {
      candidates.push_back(j);
    }
  }
  const bool centred = !intercept.empty();

  // Standardised candidate columns and centred response.
  Matrix Xs(K, static_cast<Eigen::Index>(candidates.size()));
  std::vector<bool> usable(candidates.size(), true);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    Vector col = Psi.col(candidates[i]);
    if (centred) col.array() -= col.mean();
    const double norm = col.norm();
    if (norm <= 1e-12 * std::max(1.0, Psi.col(candidates[i]).norm())) {
      usable[i] = false;
      Xs.col(static_cast<Eigen::Index>(i)).setZero();
    } else {
      Xs.col(static_cast<Eigen::Index>(i)) = col / norm;
    }
  }
  Vector r = z;
  if (centred) r.array() -= z.mean();

  const std::size_t base = intercept.size();
  const std::size_t cap = std::min<std::size_t>(max_terms, static_cast<std::size_t>(K - 1));
  const std::size_t max_steps = cap > base ? cap - base : 0;

  // Least-angle path: record the order in which columns enter.
  std::vector<Eigen::Index> order;  // indices into candidates
  std::vector<bool> in_active(candidates.size(), false);
  Vector mu = Vector::Zero(K);
  const double r_scale = std::max(r.norm(), 1e-300);
  while (order.size() < max_steps) {
    const Vector corr = Xs.transpose() * (r - mu);
    double C = 0.0;
    Eigen::Index best = -1;
    for (Eigen::Index j = 0; j < corr.size(); ++j) {
      if (!usable[j]) continue;
      C = std::max(C, std::abs(corr[j]));
      if (!in_active[j] && (best < 0 || std::abs(corr[j]) > std::abs(corr[best]))) best = j;
    }
    if (C <= 1e-12 * r_scale) break;
    if (order.empty()) {
      if (best < 0) break;
      order.push_back(best);
      in_active[best] = true;
    }

    const auto na = static_cast<Eigen::Index>(order.size());
    Matrix XA(K, na);
    for (Eigen::Index a = 0; a < na; ++a) {
      const double s = corr[order[a]] >= 0.0 ? 1.0 : -1.0;
      XA.col(a) = s * Xs.col(order[a]);
    }
    const Matrix G = XA.transpose() * XA;
    Eigen::LDLT<Matrix> ldlt(G);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
    const Vector w_raw = ldlt.solve(Vector::Ones(na));
    const double denom = w_raw.sum();
    if (!(denom > 0.0) || !std::isfinite(denom)) break;
    const double AA = 1.0 / std::sqrt(denom);
    const Vector u = XA * (AA * w_raw);
    const Vector a = Xs.transpose() * u;

    double gamma = C / AA;
    Eigen::Index entering = -1;
    for (Eigen::Index j = 0; j < corr.size(); ++j) {
      if (!usable[j] || in_active[j]) continue;
      for (double g : {(C - corr[j]) / (AA - a[j]), (C + corr[j]) / (AA + a[j])}) {
        if (g > 1e-14 && g < gamma) {
          gamma = g;
          entering = j;
        }
      }
    }
    mu += gamma * u;
    if (entering < 0) break;  // the full least-squares step was reached
    if (order.size() >= max_steps) break;
    order.push_back(entering);
    in_active[entering] = true;
  }

  LarsFit out;
  out.path.reserve(order.size());
  for (Eigen::Index j : order) out.path.push_back(candidates[j]);

  bool have = false;
  for (std::size_t s = 0; s <= out.path.size(); ++s) {
    std::vector<Eigen::Index> cols = intercept;
    cols.insert(cols.end(), out.path.begin(), out.path.begin() + static_cast<std::ptrdiff_t>(s));
    if (cols.empty()) continue;
    Matrix sub(K, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = Psi.col(cols[c]);
    Vector coef;
    try {
      coef = fit_ols(sub, z);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::RankDeficient) throw;
      break;
    }
    const double loo = loo_error(sub, z, coef);
    if (!have || (loo < out.loo_error && !loo_tie(loo, out.loo_error))) {
      have = true;
      out.loo_error = loo;
      out.active.assign(static_cast<std::size_t>(B), false);
      out.coefficients = Vector::Zero(B);
      for (std::size_t c = 0; c < cols.size(); ++c) {
        out.active[cols[c]] = true;
        out.coefficients[cols[c]] = coef[static_cast<Eigen::Index>(c)];
      }
    }
  }
  if (!have) throw Error(ErrorCode::RankDeficient, "fit_lars: no prefix of the path could be refit");
  return out;
}

std::size_t PceModel::n_active() const {
  return static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
}

double PceModel::mean() const {
  for (std::size_t a = 0; a < index_set.size(); ++a) {
    const auto& idx = index_set.indices[a];
    if (std::all_of(idx.begin(), idx.end(), [](int v) { return v == 0; })) {
      return coefficients[static_cast<Eigen::Index>(a)];
    }
  }
  return 0.0;
}

double PceModel::variance() const {
  double v = 0.0;
  for (std::size_t a = 0; a < index_set.size(); ++a) {
    const auto& idx = index_set.indices[a];
    if (std::any_of(idx.begin(), idx.end(), [](int e) { return e != 0; })) {
      v += coefficients[static_cast<Eigen::Index>(a)] * coefficients[static_cast<Eigen::Index>(a)];
    }
  }
  return v;
}

double eval_pce(const PceModel& model, const Eigen::Ref<const Vector>& x) {
  const PriorSpec& prior = model.input_spec;
  const std::size_t M = prior.dimension();
  if (static_cast<std::size_t>(x.size()) != M) {
    throw Error(ErrorCode::DimensionMismatch, "eval_pce: point dimension mismatch");
  }
  const int p = model.index_set.max_degree;
  // Small fixed buffer covers the common case without allocating.
  double stack[64];
  std::vector<double> heap;
  double* table = stack;
  if (M * (p + 1) > 64) {
    heap.resize(M * (p + 1));
    table = heap.data();
  }
  for (std::size_t j = 0; j < M; ++j) {
    if (!(x[j] >= prior.lower(j) && x[j] <= prior.upper(j))) {
      throw Error(ErrorCode::OutOfSupport, "eval_pce: input " + prior[j].name + " outside support");
    }
    legendre_orthonormal_all(prior.to_reference(j, x[j]), std::span(table + j * (p + 1), p + 1));
  }
  double sum = 0.0;
  for (std::size_t a = 0; a < model.index_set.size(); ++a) {
    if (!model.active[a]) continue;
    double v = model.coefficients[static_cast<Eigen::Index>(a)];
    const auto& idx = model.index_set.indices[a];
    for (std::size_t j = 0; j < M; ++j) v *= table[j * (p + 1) + idx[j]];
    sum += v;
  }
  return sum;
}

Vector eval_pce_many(const PceModel& model, const Matrix& X) {
  Vector out(X.rows());
  for (Eigen::Index k = 0; k < X.rows(); ++k) out[k] = eval_pce(model, X.row(k).transpose());
  return out;
}

std::vector<DegreeTrial> sweep_degrees(const Matrix& X, const Vector& z, const PriorSpec& prior,
                                       const PceConfig& config) {
  if (config.degrees.empty()) throw Error(ErrorCode::InvalidArgument, "no candidate degrees");
  if (X.rows() != z.size()) throw Error(ErrorCode::DimensionMismatch, "sweep_degrees: row mismatch");
  std::vector<DegreeTrial> trials;
  trials.reserve(config.degrees.size());
  for (int p : config.degrees) {
    DegreeTrial t;
    t.degree = p;
    t.loo_error = kInf;
    MultiIndexSet A = gen_multi_indices(prior.dimension(), p, config.q_norm);
    const Matrix Psi = design_matrix(X, prior, A);
    try {
      LarsFit fit = fit_lars(Psi, z, config.max_terms);
      t.loo_error = fit.loo_error;
      t.model = PceModel{std::move(A), std::move(fit.coefficients), std::move(fit.active), prior,
                         fit.loo_error};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::RankDeficient) throw;
    }
    trials.push_back(std::move(t));
  }
  return trials;
}

PceModel select_degree(std::vector<DegreeTrial> trials) {
  DegreeTrial* best = nullptr;
  for (auto& t : trials) {
    if (!t.model || !std::isfinite(t.loo_error)) continue;
    if (best == nullptr) {
      best = &t;
    } else if (loo_tie(t.loo_error, best->loo_error)) {
      if (t.degree < best->degree) best = &t;
    } else if (t.loo_error < best->loo_error) {
      best = &t;
    }
  }
  if (best == nullptr) {
    throw Error(ErrorCode::AllModelsDegenerate, "no candidate degree gave a finite LOO error");
  }
  return std::move(*best->model);
}

PceModel adapt_degree(const Matrix& X, const Vector& z, const PriorSpec& prior,
                      const PceConfig& config) {
  return select_degree(sweep_degrees(X, z, prior, config));
}

}  // namespace pcapce
