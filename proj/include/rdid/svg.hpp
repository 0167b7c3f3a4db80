#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rdid/csv.hpp"
#include "rdid/error.hpp"

namespace rdid {

enum class FigureKind { Scatter, Interval };

// Data for one chart. Scatter uses x/y. Interval uses x with lower/upper
// bounds, an optional point series y and an optional ci_lower/ci_upper band.
struct FigureSeries {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> ci_lower;
  std::vector<double> ci_upper;
};

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string svg_escape(const std::string& s) {
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

inline void check_series(const FigureSeries& s, FigureKind kind) {
  if (s.x.empty()) throw Error(ErrorCode::Io, "cannot draw an empty series");
  const std::size_t n = s.x.size();
  auto same = [&](const std::vector<double>& v, bool required) {
    if (v.empty()) return !required;
    return v.size() == n;
  };
  const bool ok = kind == FigureKind::Scatter
                      ? same(s.y, true)
                      : same(s.lower, false) && same(s.upper, false) && same(s.y, false) &&
                            same(s.ci_lower, false) && same(s.ci_upper, false) &&
                            s.lower.empty() == s.upper.empty() && s.ci_lower.empty() == s.ci_upper.empty() &&
                            !(s.lower.empty() && s.y.empty());
  if (!ok) throw Error(ErrorCode::Io, "figure series have mismatched lengths");
}

}  // namespace detail

// Self-contained SVG; identical input gives identical bytes.
inline std::string render_svg(const FigureSeries& s, FigureKind kind) {
  detail::check_series(s, kind);
  constexpr double W = 640, H = 400, left = 70, right = 20, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;

  double xmin = *std::min_element(s.x.begin(), s.x.end());
  double xmax = *std::max_element(s.x.begin(), s.x.end());
  double ymin = INFINITY, ymax = -INFINITY;
  for (const auto* v : {&s.y, &s.lower, &s.upper, &s.ci_lower, &s.ci_upper})
    for (double d : *v)
      if (std::isfinite(d)) {
        ymin = std::min(ymin, d);
        ymax = std::max(ymax, d);
      }
  if (!std::isfinite(ymin)) ymin = ymax = 0.0;
  if (xmax == xmin) { xmin -= 1.0; xmax += 1.0; }
  if (ymax == ymin) { ymin -= 1.0; ymax += 1.0; }
  const double xpad = 0.05 * (xmax - xmin), ypad = 0.08 * (ymax - ymin);
  xmin -= xpad; xmax += xpad; ymin -= ypad; ymax += ypad;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };
  using detail::svg_num;

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << svg_num(W / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
    << detail::svg_escape(s.title) << "</text>\n";
  o << "<rect x=\"" << svg_num(left) << "\" y=\"" << svg_num(top) << "\" width=\"" << svg_num(pw) << "\" height=\""
    << svg_num(ph) << "\" fill=\"none\" stroke=\"#444\"/>\n";

  // Zero reference line when it is in range.
  if (ymin < 0.0 && ymax > 0.0)
    o << "<line x1=\"" << svg_num(left) << "\" y1=\"" << svg_num(py(0)) << "\" x2=\"" << svg_num(left + pw)
      << "\" y2=\"" << svg_num(py(0)) << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";

  std::vector<double> ticks = s.x;
  std::sort(ticks.begin(), ticks.end());
  ticks.erase(std::unique(ticks.begin(), ticks.end()), ticks.end());
  for (double x : ticks) {
    o << "<g class=\"xtick\"><line x1=\"" << svg_num(px(x)) << "\" y1=\"" << svg_num(top + ph) << "\" x2=\""
      << svg_num(px(x)) << "\" y2=\"" << svg_num(top + ph + 5) << "\" stroke=\"#444\"/>";
    o << "<text x=\"" << svg_num(px(x)) << "\" y=\"" << svg_num(top + ph + 20)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << csv::format_double(x)
      << "</text></g>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double v = ymin + (ymax - ymin) * k / 4.0;
    o << "<g class=\"ytick\"><line x1=\"" << svg_num(left - 5) << "\" y1=\"" << svg_num(py(v)) << "\" x2=\""
      << svg_num(left) << "\" y2=\"" << svg_num(py(v)) << "\" stroke=\"#444\"/>";
    o << "<text x=\"" << svg_num(left - 8) << "\" y=\"" << svg_num(py(v) + 4)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << svg_num(v) << "</text></g>\n";
  }
  o << "<text x=\"" << svg_num(left + pw / 2) << "\" y=\"" << svg_num(H - 15)
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << detail::svg_escape(s.x_label)
    << "</text>\n";
  o << "<text transform=\"translate(18 " << svg_num(top + ph / 2)
    << ") rotate(-90)\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
    << detail::svg_escape(s.y_label) << "</text>\n";

  // Points are drawn in x order so the polylines read left to right.
  std::vector<std::size_t> order(s.x.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.x[a] < s.x[b]; });
  auto polyline = [&](const std::vector<double>& v, const char* cls, const char* style) {
    o << "<polyline class=\"" << cls << "\" fill=\"none\" " << style << " points=\"";
    bool first = true;
    for (std::size_t i : order) {
      if (!std::isfinite(v[i])) continue;
      o << (first ? "" : " ") << svg_num(px(s.x[i])) << ',' << svg_num(py(v[i]));
      first = false;
    }
    o << "\"/>\n";
  };

  if (kind == FigureKind::Scatter) {
    for (std::size_t i : order)
      if (std::isfinite(s.y[i]))
        o << "<circle class=\"point\" cx=\"" << svg_num(px(s.x[i])) << "\" cy=\"" << svg_num(py(s.y[i]))
          << "\" r=\"4\" fill=\"#1f5fa8\"/>\n";
  } else {
    if (!s.ci_lower.empty()) {
      o << "<polygon class=\"ci-band\" fill=\"#1f5fa8\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
      bool first = true;
      for (std::size_t i : order) {
        if (!std::isfinite(s.ci_upper[i])) continue;
        o << (first ? "" : " ") << svg_num(px(s.x[i])) << ',' << svg_num(py(s.ci_upper[i]));
        first = false;
      }
      for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if (!std::isfinite(s.ci_lower[*it])) continue;
        o << ' ' << svg_num(px(s.x[*it])) << ',' << svg_num(py(s.ci_lower[*it]));
      }
      o << "\"/>\n";
      polyline(s.ci_lower, "ci", "stroke=\"#1f5fa8\" stroke-dasharray=\"5 3\"");
      polyline(s.ci_upper, "ci", "stroke=\"#1f5fa8\" stroke-dasharray=\"5 3\"");
    }
    if (!s.lower.empty()) {
      polyline(s.lower, "bound", "stroke=\"#b2182b\" stroke-width=\"2\"");
      polyline(s.upper, "bound", "stroke=\"#b2182b\" stroke-width=\"2\"");
    }
    if (!s.y.empty()) {
      polyline(s.y, "estimate", "stroke=\"#222\" stroke-width=\"2\"");
      for (std::size_t i : order)
        if (std::isfinite(s.y[i]))
          o << "<circle class=\"point\" cx=\"" << svg_num(px(s.x[i])) << "\" cy=\"" << svg_num(py(s.y[i]))
            << "\" r=\"3\" fill=\"#222\"/>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

inline void emit_figure(const FigureSeries& s, FigureKind kind, const std::string& path) {
  const std::string body = render_svg(s, kind);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  f << body;
  if (!f) throw Error(ErrorCode::Io, "failed writing '" + path + "'");
}

}  // namespace rdid
