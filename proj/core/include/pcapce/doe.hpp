#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "pcapce/random.hpp"
#include "pcapce/types.hpp"

namespace pcapce {

struct Uniform {
  double lo = 0.0;
  double hi = 1.0;

  double width() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x <= hi; }
  double logpdf(double x) const;
};

/// Marginal distribution of one input. Only uniform marginals exist today.
using Distribution = std::variant<Uniform>;

struct PriorEntry {
  std::string name;
  Distribution distribution;
};

/// Independent marginals over the M model inputs.
class PriorSpec {
 public:
  PriorSpec() = default;
  explicit PriorSpec(std::vector<PriorEntry> entries);

  std::size_t dimension() const { return entries_.size(); }
  const std::vector<PriorEntry>& entries() const { return entries_; }
  const PriorEntry& operator[](std::size_t j) const { return entries_[j]; }
  std::vector<std::string> names() const;

  /// Support bounds of marginal j.
  double lower(std::size_t j) const;
  double upper(std::size_t j) const;

  bool contains(const Eigen::Ref<const Vector>& x) const;

  /// Affine map of coordinate j from its support onto [-1, 1].
  double to_reference(std::size_t j, double x) const;

 private:
  std::vector<PriorEntry> entries_;
};

/// The three soil inputs (G0 kPa, K0, OCR) with their field-derived ranges.
PriorSpec pile_soil_prior();

enum class DesignProvenance { LatinHypercube, PriorMonteCarlo };

struct DesignMatrix {
  Matrix rows;  // K x M, physical units
  DesignProvenance provenance = DesignProvenance::LatinHypercube;
  std::uint64_t seed = 0;
};

/// K x M stratified sample of the unit hypercube. Each column holds exactly
/// one value per stratum [i/K, (i+1)/K). With `jitter` the value is uniform
/// inside its stratum, otherwise it sits at the stratum center.
Matrix latin_hypercube(std::size_t K, std::size_t M, std::uint64_t seed, bool jitter = true);

/// Maps unit-hypercube columns affinely onto the prior supports.
DesignMatrix scale_to_prior(const Matrix& unit, const PriorSpec& prior,
                            DesignProvenance provenance = DesignProvenance::LatinHypercube,
                            std::uint64_t seed = 0);

/// Sum of marginal log densities; -inf outside the support.
double prior_logpdf(const PriorSpec& prior, const Eigen::Ref<const Vector>& x);

Matrix sample_prior(const PriorSpec& prior, std::size_t n, std::uint64_t seed);

}  // namespace pcapce
