#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace pcapce::cli {

/// Minimal line/band chart written as standalone SVG.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label);

  /// Flips the y axis so values grow downward (depth plots).
  void invert_y() { invert_y_ = true; }
  void line(const std::vector<double>& x, const std::vector<double>& y, const std::string& color,
            const std::string& label, bool dashed = false);
  void markers(const std::vector<double>& x, const std::vector<double>& y, const std::string& color,
               const std::string& label);
  /// Shaded region between x_lo(y) and x_hi(y) (a horizontal band along y).
  void band_x(const std::vector<double>& y, const std::vector<double>& x_lo, const std::vector<double>& x_hi,
              const std::string& color, const std::string& label);

  void save(const std::filesystem::path& path) const;

 private:
  struct Series {
    enum class Kind { Line, Markers, Band } kind;
    std::vector<double> x, y, x2;
    std::string color, label;
    bool dashed = false;
  };
  std::string title_, x_label_, y_label_;
  bool invert_y_ = false;
  std::vector<Series> series_;
};

}  // namespace pcapce::cli
