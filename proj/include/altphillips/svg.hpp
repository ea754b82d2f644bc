#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace altphillips {

struct PlotSeries {
  std::string name;
  std::vector<double> x, y;
  std::string color = "#1f77b4";
  bool markers = false;
};

namespace detail {

inline std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string tick(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else if (c == '&')
      out += "&amp;";
    else
      out += c;
  }
  return out;
}

}  // namespace detail

// Line plot with linear axes; non-finite points break the polyline.
inline std::string svg_line_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                                 const std::vector<PlotSeries>& series) {
  const double W = 640, H = 420, L = 70, R = 170, T = 40, B = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!(x0 <= x1)) x0 = 0, x1 = 1;
  if (!(y0 <= y1)) y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-300) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12 * std::max(1.0, std::abs(y0))) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::fixed(W, 0) + "\" height=\"" +
         detail::fixed(H, 0) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + detail::fixed(W / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
         detail::xml_escape(title) + "</text>\n";
  out += "<rect x=\"" + detail::fixed(L) + "\" y=\"" + detail::fixed(T) + "\" width=\"" + detail::fixed(W - L - R) +
         "\" height=\"" + detail::fixed(H - T - B) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    out += "<text x=\"" + detail::fixed(px(xv)) + "\" y=\"" + detail::fixed(H - B + 16) +
           "\" text-anchor=\"middle\">" + detail::tick(xv) + "</text>\n";
    out += "<text x=\"" + detail::fixed(L - 6) + "\" y=\"" + detail::fixed(py(yv) + 4) + "\" text-anchor=\"end\">" +
           detail::tick(yv) + "</text>\n";
  }
  out += "<text x=\"" + detail::fixed(L + (W - L - R) / 2) + "\" y=\"" + detail::fixed(H - 12) +
         "\" text-anchor=\"middle\">" + detail::xml_escape(xlabel) + "</text>\n";
  out += "<text transform=\"translate(16," + detail::fixed(T + (H - T - B) / 2) +
         ") rotate(-90)\" text-anchor=\"middle\">" + detail::xml_escape(ylabel) + "</text>\n";
  int legend = 0;
  for (const auto& s : series) {
    std::string pts;
    auto flush = [&] {
      if (!pts.empty())
        out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
      pts.clear();
    };
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        flush();
        continue;
      }
      pts += (pts.empty() ? "" : " ") + detail::fixed(px(s.x[i])) + "," + detail::fixed(py(s.y[i]));
      if (s.markers)
        out += "<circle cx=\"" + detail::fixed(px(s.x[i])) + "\" cy=\"" + detail::fixed(py(s.y[i])) + "\" r=\"3\" fill=\"" +
               s.color + "\"/>\n";
    }
    flush();
    const double ly = T + 14 + 18 * legend++;
    out += "<line x1=\"" + detail::fixed(W - R + 12) + "\" y1=\"" + detail::fixed(ly - 4) + "\" x2=\"" +
           detail::fixed(W - R + 32) + "\" y2=\"" + detail::fixed(ly - 4) + "\" stroke=\"" + s.color +
           "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + detail::fixed(W - R + 38) + "\" y=\"" + detail::fixed(ly) + "\">" + detail::xml_escape(s.name) +
           "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace altphillips
