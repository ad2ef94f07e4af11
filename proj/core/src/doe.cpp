#include "pcapce/doe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "pcapce/error.hpp"

namespace pcapce {

double Uniform::logpdf(double x) const {
  if (!contains(x)) return -std::numeric_limits<double>::infinity();
  return -std::log(width());
}

PriorSpec::PriorSpec(std::vector<PriorEntry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw Error(ErrorCode::InvalidArgument, "prior needs at least one entry");
  std::set<std::string> seen;
  for (const auto& e : entries_) {
    if (!seen.insert(e.name).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate prior entry '" + e.name + "'");
    }
    const auto& u = std::get<Uniform>(e.distribution);
    if (!(u.lo < u.hi) || !std::isfinite(u.lo) || !std::isfinite(u.hi)) {
      throw Error(ErrorCode::InvalidArgument, "prior entry '" + e.name + "' needs finite lo < hi");
    }
  }
}

std::vector<std::string> PriorSpec::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

double PriorSpec::lower(std::size_t j) const {
  return std::visit([](const auto& d) { return d.lo; }, entries_[j].distribution);
}

double PriorSpec::upper(std::size_t j) const {
  return std::visit([](const auto& d) { return d.hi; }, entries_[j].distribution);
}

bool PriorSpec::contains(const Eigen::Ref<const Vector>& x) const {
  if (static_cast<std::size_t>(x.size()) != dimension()) return false;
  for (std::size_t j = 0; j < dimension(); ++j) {
    if (!(x[j] >= lower(j) && x[j] <= upper(j))) return false;
  }
  return true;
}

double PriorSpec::to_reference(std::size_t j, double x) const {
  const double lo = lower(j);
  const double hi = upper(j);
  return 2.0 * (x - lo) / (hi - lo) - 1.0;
}

PriorSpec pile_soil_prior() {
  return PriorSpec({
      {"G0", Uniform{55000.0, 165000.0}},
      {"K0", Uniform{1.2, 1.8}},
      {"OCR", Uniform{15.0, 50.0}},
  });
}

Matrix latin_hypercube(std::size_t K, std::size_t M, std::uint64_t seed, bool jitter) {
  if (K == 0 || M == 0) throw Error(ErrorCode::InvalidArgument, "latin_hypercube needs K, M >= 1");
  Rng rng = make_rng(seed);
  Matrix u(K, M);
  std::vector<std::size_t> perm(K);
  const double below_one = std::nextafter(1.0, 0.0);
  for (std::size_t j = 0; j < M; ++j) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    // Fisher-Yates with our own uniform draw so designs do not depend on the
    // standard library's shuffle implementation.
    for (std::size_t i = K; i > 1; --i) {
      const auto r = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
      std::swap(perm[i - 1], perm[std::min(r, i - 1)]);
    }
    for (std::size_t i = 0; i < K; ++i) {
      const double offset = jitter ? uniform01(rng) : 0.5;
      const double stratum = static_cast<double>(perm[i]);
      double v = (stratum + offset) / static_cast<double>(K);
      // Rounding may push v onto the next stratum boundary.
      const double hi = (stratum + 1.0) / static_cast<double>(K);
      if (v >= hi) v = std::nextafter(hi, 0.0);
      u(i, j) = std::min(v, below_one);
    }
  }
  return u;
}

DesignMatrix scale_to_prior(const Matrix& unit, const PriorSpec& prior, DesignProvenance provenance,
                            std::uint64_t seed) {
  if (static_cast<std::size_t>(unit.cols()) != prior.dimension()) {
    throw Error(ErrorCode::DimensionMismatch, "unit design has " + std::to_string(unit.cols()) +
                                                  " columns, prior has " +
                                                  std::to_string(prior.dimension()));
  }
  DesignMatrix d;
  d.rows.resize(unit.rows(), unit.cols());
  for (Eigen::Index j = 0; j < unit.cols(); ++j) {
    const double lo = prior.lower(j);
    const double hi = prior.upper(j);
    for (Eigen::Index i = 0; i < unit.rows(); ++i) {
      d.rows(i, j) = std::clamp(lo + unit(i, j) * (hi - lo), lo, hi);
    }
  }
  d.provenance = provenance;
  d.seed = seed;
  return d;
}

double prior_logpdf(const PriorSpec& prior, const Eigen::Ref<const Vector>& x) {
  if (static_cast<std::size_t>(x.size()) != prior.dimension()) {
    throw Error(ErrorCode::DimensionMismatch, "prior_logpdf: point dimension mismatch");
  }
  double lp = 0.0;
  for (std::size_t j = 0; j < prior.dimension(); ++j) {
    lp += std::visit([&](const auto& d) { return d.logpdf(x[j]); }, prior[j].distribution);
    if (lp == -std::numeric_limits<double>::infinity()) return lp;
  }
  return lp;
}

Matrix sample_prior(const PriorSpec& prior, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "sample_prior needs n >= 1");
  Rng rng = make_rng(seed, 0x5eed);
  const auto M = static_cast<Eigen::Index>(prior.dimension());
  Matrix out(static_cast<Eigen::Index>(n), M);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < M; ++j) {
      out(i, j) = prior.lower(j) + uniform01(rng) * (prior.upper(j) - prior.lower(j));
    }
  }
  return out;
}

}  // namespace pcapce
