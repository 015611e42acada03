#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "blapose/error.hpp"

namespace blapose {

// Minimal static SVG charts for reports: grouped bars (one group per
// category, one bar per series) and polylines (training curves).
namespace svg {

struct Series {
  std::string label;
  std::vector<double> values;
};

inline constexpr const char* kPalette[] = {"#4472c4", "#ed7d31", "#70ad47", "#a5a5a5", "#ffc000", "#5b9bd5"};

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline double nice_ceiling(double v) {
  if (!(v > 0)) return 1.0;
  const double p = std::pow(10.0, std::floor(std::log10(v)));
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0})
    if (m * p >= v) return m * p;
  return 10.0 * p;
}

inline void axes(std::ostringstream& out, double x0, double y0, double w, double h, double ymax,
                 const std::string& ylabel) {
  out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x0) << "\" y2=\"" << num(y0 + h)
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0 + h) << "\" x2=\"" << num(x0 + w) << "\" y2=\""
      << num(y0 + h) << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double y = y0 + h - h * k / 4.0;
    out << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
        << num(ymax * k / 4.0) << "</text>\n";
  }
  out << "<text x=\"14\" y=\"" << num(y0 + h / 2) << "\" font-size=\"12\" transform=\"rotate(-90 14 "
      << num(y0 + h / 2) << ")\" text-anchor=\"middle\">" << escape(ylabel) << "</text>\n";
}

inline void legend(std::ostringstream& out, const std::vector<Series>& series, double x, double y) {
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double yy = y + 16.0 * static_cast<double>(s);
    out << "<rect x=\"" << num(x) << "\" y=\"" << num(yy - 9) << "\" width=\"10\" height=\"10\" fill=\""
        << kPalette[s % 6] << "\"/><text x=\"" << num(x + 14) << "\" y=\"" << num(yy) << "\" font-size=\"11\">"
        << escape(series[s].label) << "</text>\n";
  }
}

inline std::string bar_chart(const std::string& title, const std::vector<std::string>& categories,
                             const std::vector<Series>& series, const std::string& ylabel) {
  for (const auto& s : series)
    if (s.values.size() != categories.size()) throw DimensionMismatch("bar series length");
  const double x0 = 60, y0 = 40, h = 260;
  const double group = std::max(40.0, 14.0 * static_cast<double>(series.size()) + 12.0);
  const double w = group * static_cast<double>(categories.size());
  double ymax = 0;
  for (const auto& s : series)
    for (double v : s.values) ymax = std::max(ymax, v);
  ymax = nice_ceiling(ymax);
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(x0 + w + 160) << "\" height=\"" << num(y0 + h + 70)
      << "\">\n<text x=\"" << num(x0) << "\" y=\"22\" font-size=\"14\">" << escape(title) << "</text>\n";
  axes(out, x0, y0, w, h, ymax, ylabel);
  const double bar = (group - 12.0) / static_cast<double>(std::max<std::size_t>(1, series.size()));
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double gx = x0 + group * static_cast<double>(c) + 6.0;
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double v = series[s].values[c];
      const double bh = ymax > 0 ? h * v / ymax : 0.0;
      out << "<rect x=\"" << num(gx + bar * static_cast<double>(s)) << "\" y=\"" << num(y0 + h - bh)
          << "\" width=\"" << num(bar) << "\" height=\"" << num(bh) << "\" fill=\"" << kPalette[s % 6] << "\"/>\n";
    }
    const double cx = gx + (group - 12.0) / 2.0;
    out << "<text x=\"" << num(cx) << "\" y=\"" << num(y0 + h + 14) << "\" font-size=\"10\" text-anchor=\"end\" "
        << "transform=\"rotate(-40 " << num(cx) << ' ' << num(y0 + h + 14) << ")\">" << escape(categories[c])
        << "</text>\n";
  }
  legend(out, series, x0 + w + 16, y0 + 10);
  out << "</svg>\n";
  return out.str();
}

// Each series is plotted against its index (epoch) on a shared x axis.
inline std::string line_chart(const std::string& title, const std::vector<Series>& series,
                              const std::string& xlabel, const std::string& ylabel) {
  const double x0 = 60, y0 = 40, w = 420, h = 260;
  std::size_t n = 0;
  double ymax = 0;
  for (const auto& s : series) {
    n = std::max(n, s.values.size());
    for (double v : s.values)
      if (std::isfinite(v)) ymax = std::max(ymax, v);
  }
  ymax = nice_ceiling(ymax);
  const double dx = n > 1 ? w / static_cast<double>(n - 1) : 0.0;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(x0 + w + 160) << "\" height=\"" << num(y0 + h + 50)
      << "\">\n<text x=\"" << num(x0) << "\" y=\"22\" font-size=\"14\">" << escape(title) << "</text>\n";
  axes(out, x0, y0, w, h, ymax, ylabel);
  out << "<text x=\"" << num(x0 + w / 2) << "\" y=\"" << num(y0 + h + 32) << "\" font-size=\"12\" "
      << "text-anchor=\"middle\">" << escape(xlabel) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    out << "<polyline fill=\"none\" stroke=\"" << kPalette[s % 6] << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < series[s].values.size(); ++i) {
      const double v = series[s].values[i];
      if (!std::isfinite(v)) continue;
      out << num(x0 + dx * static_cast<double>(i)) << ',' << num(y0 + h - h * v / ymax) << ' ';
    }
    out << "\"/>\n";
  }
  legend(out, series, x0 + w + 16, y0 + 10);
  out << "</svg>\n";
  return out.str();
}

}  // namespace svg
}  // namespace blapose
