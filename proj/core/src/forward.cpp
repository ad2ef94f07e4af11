#include "pcapce/forward.hpp"

#include <lapacke.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "pcapce/error.hpp"

namespace pcapce {
namespace {

constexpr lapack_int kLower = 4;
constexpr lapack_int kUpper = 4;
constexpr lapack_int kLeading = 2 * kLower + kUpper + 1;

// Column-major LAPACK band storage for the (n + 4) unknowns y_{-2} .. y_{n+1}.
class BandSystem {
 public:
  explicit BandSystem(lapack_int n) : n_(n), ab_(static_cast<std::size_t>(kLeading) * n, 0.0) {}

  void add(lapack_int row, lapack_int col, double v) {
    ab_[static_cast<std::size_t>(col) * kLeading + (kLower + kUpper + row - col)] += v;
  }

  Vector solve(Vector rhs) {
    std::vector<lapack_int> piv(static_cast<std::size_t>(n_));
    double anorm = 0.0;
    for (lapack_int j = 0; j < n_; ++j) {
      double colsum = 0.0;
      for (lapack_int r = 0; r < kLeading; ++r) colsum += std::abs(ab_[static_cast<std::size_t>(j) * kLeading + r]);
      anorm = std::max(anorm, colsum);
    }
    lapack_int info = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, n_, n_, kLower, kUpper, ab_.data(), kLeading,
                                     piv.data());
    if (info != 0) throw Error(ErrorCode::SingularSystem, "banded factorisation failed");
    double rcond = 0.0;
    info = LAPACKE_dgbcon(LAPACK_COL_MAJOR, '1', n_, kLower, kUpper, ab_.data(), kLeading,
                          piv.data(), anorm, &rcond);
    if (info != 0 || !(rcond > 1e-15)) {
      throw Error(ErrorCode::SingularSystem, "banded system is ill-conditioned");
    }
    info = LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', n_, kLower, kUpper, 1, ab_.data(), kLeading,
                          piv.data(), rhs.data(), n_);
    if (info != 0 || !rhs.allFinite()) throw Error(ErrorCode::SingularSystem, "banded solve failed");
    return rhs;
  }

 private:
  lapack_int n_;
  std::vector<double> ab_;
};

// `spring` is the distributed spring stiffness per unit length, k(z) D.
Vector solve_beam(const Vector& spring, double H, const PileConfig& cfg) {
  const int n = cfg.n_nodes;
  const lapack_int size = n + 4;
  const double EI = cfg.bending_stiffness();
  const double dz = cfg.node_spacing();
  const double c2 = EI / (dz * dz);
  const double c3 = EI / (2.0 * dz * dz * dz);
  const double c4 = EI / (dz * dz * dz * dz);
  auto col = [](int node) { return static_cast<lapack_int>(node + 2); };

  BandSystem sys(size);
  Vector rhs = Vector::Zero(size);

  // Mudline: EI y''' = H, EI y'' = H h.
  sys.add(0, col(-2), -c3);
  sys.add(0, col(-1), 2.0 * c3);
  sys.add(0, col(1), -2.0 * c3);
  sys.add(0, col(2), c3);
  rhs[0] = H;
  sys.add(1, col(-1), c2);
  sys.add(1, col(0), -2.0 * c2);
  sys.add(1, col(1), c2);
  rhs[1] = H * cfg.load_height;

  constexpr double stencil[5] = {1.0, -4.0, 6.0, -4.0, 1.0};
  for (int i = 0; i < n; ++i) {
    const lapack_int row = col(i);
    for (int o = -2; o <= 2; ++o) sys.add(row, col(i + o), c4 * stencil[o + 2]);
    sys.add(row, col(i), spring[i]);
  }

  // Free toe: y'' = 0, y''' = 0.
  sys.add(n + 2, col(n - 2), c2);
  sys.add(n + 2, col(n - 1), -2.0 * c2);
  sys.add(n + 2, col(n), c2);
  sys.add(n + 3, col(n - 3), -c3);
  sys.add(n + 3, col(n - 2), 2.0 * c3);
  sys.add(n + 3, col(n), -2.0 * c3);
  sys.add(n + 3, col(n + 1), c3);

  const Vector all = sys.solve(std::move(rhs));
  return all.segment(2, n);
}

}  // namespace

void PileConfig::validate() const {
  if (!(diameter > 0 && embedded_length > 0 && wall_thickness > 0 && youngs_modulus > 0 &&
        load_height > 0)) {
    throw Error(ErrorCode::InvalidArgument, "pile dimensions and modulus must be positive");
  }
  if (!(wall_thickness < diameter / 2)) {
    throw Error(ErrorCode::InvalidArgument, "wall thickness must be below D/2");
  }
  if (n_nodes < 11) throw Error(ErrorCode::InvalidArgument, "pile needs at least 11 nodes");
  if (!(subgrade_constant > 0 && degradation >= 0 && stage_tolerance > 0 && picard_tolerance > 0 &&
        max_picard_iterations > 0)) {
    throw Error(ErrorCode::InvalidArgument, "invalid solver constants");
  }
}

double PileConfig::bending_stiffness() const {
  const double inner = diameter - 2.0 * wall_thickness;
  return youngs_modulus * std::numbers::pi / 64.0 *
         (std::pow(diameter, 4) - std::pow(inner, 4));
}

Vector PileConfig::depths() const {
  return Vector::LinSpaced(n_nodes, 0.0, embedded_length);
}

SoilInputs SoilInputs::from(const Eigen::Ref<const Vector>& x) {
  if (x.size() != 3) throw Error(ErrorCode::DimensionMismatch, "soil inputs need (G0, K0, OCR)");
  return {x[0], x[1], x[2]};
}

Vector subgrade_profile(const SoilInputs& soil, const PileConfig& cfg) {
  if (!(soil.G0 > 0 && soil.K0 > 0 && soil.OCR > 0)) {
    throw Error(ErrorCode::InvalidArgument, "soil inputs must be positive");
  }
  const double level = cfg.subgrade_constant * soil.G0 * std::sqrt(soil.K0) *
                       std::pow(30.0 / soil.OCR, 0.25);
  const Vector z = cfg.depths();
  return (level * (0.3 + z.array() / cfg.embedded_length)).matrix();
}

DeflectionProfile solve_linear(const Vector& k, double H, const PileConfig& cfg) {
  cfg.validate();
  if (k.size() != cfg.n_nodes) throw Error(ErrorCode::DimensionMismatch, "subgrade vector length");
  if (!(k.array() > 0.0).all()) throw Error(ErrorCode::InvalidArgument, "subgrade must be positive");
  if (!(H >= 0.0)) throw Error(ErrorCode::InvalidArgument, "load must be non-negative");
  DeflectionProfile out;
  out.load = H;
  out.y = solve_beam(k * cfg.diameter, H, cfg);
  return out;
}

DeflectionProfile solve_nonlinear(const SoilInputs& soil, double H, const PileConfig& cfg) {
  const Vector k = subgrade_profile(soil, cfg);
  DeflectionProfile out = solve_linear(k, H, cfg);
  const Vector kD = k * cfg.diameter;
  for (int it = 1; it <= cfg.max_picard_iterations; ++it) {
    const Vector softened =
        (kD.array() / (1.0 + cfg.degradation * out.y.array().abs() / cfg.diameter)).matrix();
    Vector next = solve_beam(softened, H, cfg);
    const double change = (next - out.y).cwiseAbs().maxCoeff();
    out.y = std::move(next);
    out.iterations = it;
    if (change < cfg.picard_tolerance) return out;
  }
  throw Error(ErrorCode::NoConvergence, "Picard iteration did not converge");
}

DeflectionProfile solve_stage(const SoilInputs& soil, double v_G, const PileConfig& cfg) {
  if (!(v_G > 0.0)) throw Error(ErrorCode::InvalidArgument, "stage displacement must be positive");
  cfg.validate();

  // Mudline displacement at load H; a failed solve means H is beyond what the
  // softening springs can carry, i.e. an overshoot.
  auto mudline = [&](double H, DeflectionProfile* keep) {
    try {
      DeflectionProfile p = solve_nonlinear(soil, H, cfg);
      const double y0 = p.y[0];
      if (keep != nullptr) *keep = std::move(p);
      return y0;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoConvergence && e.code() != ErrorCode::SingularSystem) throw;
      return std::numeric_limits<double>::infinity();
    }
  };

  // The linear response is the stiffest, so it underestimates the load only
  // by the softening; start the bracket from half of it.
  const double y_unit = solve_linear(subgrade_profile(soil, cfg), 1.0, cfg).y[0];
  double lo = 0.0;
  double hi = 0.5 * v_G / y_unit;
  DeflectionProfile best;
  int doublings = 0;
  for (;;) {
    const double y0 = mudline(hi, &best);
    if (std::abs(y0 - v_G) <= cfg.stage_tolerance) {
      best.load = hi;
      return best;
    }
    if (y0 > v_G) break;
    lo = hi;
    hi *= 2.0;
    if (++doublings > 60) throw Error(ErrorCode::NoConvergence, "could not bracket stage load");
  }

  for (int step = 1; step <= 200; ++step) {
    const double mid = 0.5 * (lo + hi);
    DeflectionProfile trial;
    const double y0 = mudline(mid, &trial);
    if (std::abs(y0 - v_G) <= cfg.stage_tolerance) {
      trial.load = mid;
      trial.iterations = step;
      return trial;
    }
    (y0 < v_G ? lo : hi) = mid;
  }
  throw Error(ErrorCode::NoConvergence, "stage bisection did not converge");
}

EnsembleResult run_ensemble(const Matrix& X, double v_G, const PileConfig& cfg) {
  if (X.cols() != 3) throw Error(ErrorCode::DimensionMismatch, "ensemble design needs 3 columns");
  EnsembleResult out;
  out.profiles.resize(X.rows(), cfg.n_nodes);
  out.loads.resize(X.rows());
  for (Eigen::Index k = 0; k < X.rows(); ++k) {
    try {
      const DeflectionProfile p = solve_stage(SoilInputs::from(X.row(k).transpose()), v_G, cfg);
      out.profiles.row(k) = p.y.transpose();
      out.loads[k] = p.load;
    } catch (const Error& e) {
      throw Error(e.code(), "ensemble row " + std::to_string(k) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace pcapce
