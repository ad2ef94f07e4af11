#include "pcapce_cli/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "pcapce/error.hpp"

namespace pcapce::cli {
namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 80, kRight = 170, kTop = 40, kBottom = 60;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

// Round tick spacing giving about five intervals.
double tick_step(double span) {
  if (!(span > 0.0)) return 1.0;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace

SvgPlot::SvgPlot(std::string title, std::string x_label, std::string y_label)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

void SvgPlot::line(const std::vector<double>& x, const std::vector<double>& y, const std::string& color,
                   const std::string& label, bool dashed) {
  series_.push_back({Series::Kind::Line, x, y, {}, color, label, dashed});
}

void SvgPlot::markers(const std::vector<double>& x, const std::vector<double>& y, const std::string& color,
                      const std::string& label) {
  series_.push_back({Series::Kind::Markers, x, y, {}, color, label, false});
}

void SvgPlot::band_x(const std::vector<double>& y, const std::vector<double>& x_lo,
                     const std::vector<double>& x_hi, const std::string& color, const std::string& label) {
  series_.push_back({Series::Kind::Band, x_lo, y, x_hi, color, label, false});
}

void SvgPlot::save(const std::filesystem::path& path) const {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  auto grow = [](double v, double& lo, double& hi) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  };
  for (const auto& s : series_) {
    for (double v : s.x) grow(v, xmin, xmax);
    for (double v : s.x2) grow(v, xmin, xmax);
    for (double v : s.y) grow(v, ymin, ymax);
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1;
  if (!std::isfinite(ymin)) ymin = 0, ymax = 1;
  if (xmax <= xmin) xmin -= 0.5, xmax += 0.5;
  if (ymax <= ymin) ymin -= 0.5, ymax += 0.5;
  const double xpad = 0.05 * (xmax - xmin), ypad = 0.05 * (ymax - ymin);
  xmin -= xpad, xmax += xpad, ymin -= ypad, ymax += ypad;

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) {
    const double f = (y - ymin) / (ymax - ymin);
    return invert_y_ ? kTop + f * ph : kTop + (1.0 - f) * ph;
  };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << escape(title_)
    << "</text>\n";

  const double xs = tick_step(xmax - xmin), ys = tick_step(ymax - ymin);
  for (double t = std::ceil(xmin / xs) * xs; t <= xmax; t += xs) {
    o << "<line x1=\"" << fmt(px(t)) << "\" y1=\"" << kTop << "\" x2=\"" << fmt(px(t)) << "\" y2=\""
      << kTop + ph << "\" stroke=\"#e0e0e0\"/>\n";
    o << "<text x=\"" << fmt(px(t)) << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">"
      << fmt(std::abs(t) < 1e-12 * xs ? 0.0 : t) << "</text>\n";
  }
  for (double t = std::ceil(ymin / ys) * ys; t <= ymax; t += ys) {
    o << "<line x1=\"" << kLeft << "\" y1=\"" << fmt(py(t)) << "\" x2=\"" << kLeft + pw << "\" y2=\""
      << fmt(py(t)) << "\" stroke=\"#e0e0e0\"/>\n";
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << fmt(py(t) + 4) << "\" text-anchor=\"end\">"
      << fmt(std::abs(t) < 1e-12 * ys ? 0.0 : t) << "</text>\n";
  }
  o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 16 << "\" text-anchor=\"middle\">"
    << escape(x_label_) << "</text>\n";
  o << "<text transform=\"translate(20," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(y_label_) << "</text>\n";

  double legend_y = kTop + 10;
  for (const auto& s : series_) {
    if (s.kind == Series::Kind::Band) {
      o << "<polygon fill=\"" << s.color << "\" fill-opacity=\"0.25\" stroke=\"" << s.color
        << "\" stroke-width=\"0.5\" points=\"";
      for (std::size_t i = 0; i < s.y.size(); ++i) o << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i])) << ' ';
      for (std::size_t i = s.y.size(); i-- > 0;) o << fmt(px(s.x2[i])) << ',' << fmt(py(s.y[i])) << ' ';
      o << "\"/>\n";
    } else if (s.kind == Series::Kind::Line) {
      o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\""
        << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) o << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i])) << ' ';
      }
      o << "\"/>\n";
    } else {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        o << "<circle cx=\"" << fmt(px(s.x[i])) << "\" cy=\"" << fmt(py(s.y[i])) << "\" r=\"2\" fill=\""
          << s.color << "\"/>\n";
      }
    }
    if (!s.label.empty()) {
      const double lx = kLeft + pw + 12;
      o << "<rect x=\"" << lx << "\" y=\"" << legend_y - 8 << "\" width=\"14\" height=\"10\" fill=\"" << s.color
        << "\"" << (s.kind == Series::Kind::Band ? " fill-opacity=\"0.35\"" : "") << "/>\n";
      o << "<text x=\"" << lx + 20 << "\" y=\"" << legend_y + 1 << "\">" << escape(s.label) << "</text>\n";
      legend_y += 18;
    }
  }
  o << "</svg>\n";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << o.str();
}

}  // namespace pcapce::cli
