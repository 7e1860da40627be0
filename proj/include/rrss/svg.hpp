#pragma once

// Minimal SVG line charts with a log10 y axis.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace rrss::svg {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (x, y); y <= 0 is skipped
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b"};

}  // namespace detail

inline void write_log_chart(std::ostream& out, const std::string& title,
                            const std::string& x_label, const std::string& y_label,
                            const std::vector<Series>& series) {
  constexpr double W = 720, H = 480, L = 80, R = 160, T = 40, B = 60;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
  double y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!(y > 0.0) || !std::isfinite(y) || !std::isfinite(x)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, std::log10(y));
      y1 = std::max(y1, std::log10(y));
    }
  }
  if (!(x0 <= x1)) {
    x0 = 0;
    x1 = 1;
    y0 = 0;
    y1 = 1;
  }
  y0 = std::floor(y0);
  y1 = std::ceil(y1);
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double ly) { return H - B - (ly - y0) / (y1 - y0) * (H - T - B); };

  using detail::fmt;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << detail::escape(title) << "</text>\n";
  out << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R
      << "\" height=\"" << H - T - B << "\" fill=\"none\" stroke=\"black\"/>\n";

  const int decades = static_cast<int>(y1 - y0);
  const int step = std::max(1, decades / 8);
  for (int d = static_cast<int>(y0); d <= static_cast<int>(y1); d += step) {
    const double y = py(d);
    out << "<line x1=\"" << L << "\" y1=\"" << fmt(y) << "\" x2=\"" << W - R << "\" y2=\""
        << fmt(y) << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << L - 6 << "\" y=\"" << fmt(y + 4)
        << "\" text-anchor=\"end\">1e" << d << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double x = x0 + (x1 - x0) * k / 4.0;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", x);
    out << "<text x=\"" << fmt(px(x)) << "\" y=\"" << H - B + 18
        << "\" text-anchor=\"middle\">" << buf << "</text>\n";
  }
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 16
      << "\" text-anchor=\"middle\">" << detail::escape(x_label) << "</text>\n";
  out << "<text transform=\"translate(18," << (T + H - B) / 2
      << ") rotate(-90)\" text-anchor=\"middle\">" << detail::escape(y_label)
      << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = detail::kPalette[k % std::size(detail::kPalette)];
    std::string path;
    bool pen_down = false;
    for (const auto& [x, y] : series[k].points) {
      if (!(y > 0.0) || !std::isfinite(y) || !std::isfinite(x)) {
        pen_down = false;
        continue;
      }
      path += (pen_down ? " L" : " M") + fmt(px(x)) + "," + fmt(py(std::log10(y)));
      pen_down = true;
    }
    if (!path.empty()) {
      out << "<path d=\"" << path.substr(1) << "\" fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"1.5\"/>\n";
    }
    const double ly = T + 16 + 18.0 * static_cast<double>(k);
    out << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << W - R + 36 << "\" y=\"" << ly + 4 << "\">"
        << detail::escape(series[k].name) << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace rrss::svg
