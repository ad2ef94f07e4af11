#pragma once

#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "pcapce/doe.hpp"
#include "pcapce/pca.hpp"
#include "pcapce/pce.hpp"
#include "pcapce/types.hpp"

namespace pcapce {

inline constexpr int kSurrogateFormatVersion = 1;

enum class SurrogateMode {
  PcaPce,        // PCEs on the retained principal-component scores
  PointwisePce,  // one PCE per output point, no reduction
};

std::string_view to_string(SurrogateMode mode);
SurrogateMode surrogate_mode_from_string(std::string_view s);

struct SurrogateConfig {
  double epsilon_dr = 0.02;
  SurrogateMode mode = SurrogateMode::PcaPce;
  PceConfig pce;
};

struct TrainingMeta {
  std::size_t training_K = 0;
  double epsilon_dr = 0.02;
  double explained_variance = 1.0;  // fraction kept by the retained components
  double pca_error = 0.0;           // reconstruction error on the training set
  double surrogate_error = 0.0;     // same measure for the full surrogate
};

/// High-dimensional emulator: either PCA + one PCE per retained score, or a
/// PCE per output point. Immutable once trained.
class PcaPceSurrogate {
 public:
  SurrogateMode mode = SurrogateMode::PcaPce;
  std::optional<PcaBasis> basis;   // present in PcaPce mode
  std::vector<PceModel> components;
  PriorSpec prior;
  TrainingMeta meta;
  int format_version = kSurrogateFormatVersion;

  Eigen::Index n_output() const;
  std::size_t n_input() const { return prior.dimension(); }

  /// Values of each component PCE at x (reduced scores in PcaPce mode).
  Vector component_values(const Eigen::Ref<const Vector>& x) const;
  Vector predict(const Eigen::Ref<const Vector>& x) const;
  Matrix predict_many(const Matrix& X) const;
};

/// Fits PCA (PcaPce mode), keeps the components needed for epsilon_dr, and
/// fits a degree-adaptive sparse PCE to each retained score column.
PcaPceSurrogate train(const Matrix& X, const Matrix& Y, const PriorSpec& prior,
                      const SurrogateConfig& config);

struct ValidationReport {
  double mape = 0.0;      // percent
  Vector per_point_mape;  // percent, one per output point
  std::size_t n_test = 0;
};

/// Mean absolute percentage error with the floor 1e-3 max|Y_test| added to
/// each denominator.
ValidationReport mape(const Matrix& Y_test, const Matrix& Y_pred);
ValidationReport mape(const PcaPceSurrogate& s, const Matrix& X_test, const Matrix& Y_test);

void save(const PcaPceSurrogate& s, const std::filesystem::path& path);
PcaPceSurrogate load(const std::filesystem::path& path);

}  // namespace pcapce
