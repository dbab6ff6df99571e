#include "netabs/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace netabs {

namespace {

constexpr int kMaxPoints = 1200;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& s) {
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

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::vector<Box> case_study_boxes() {
  auto cube = [](const std::string& name, double lo, double hi) {
    return Box{name, {{lo, hi}, {lo, hi}, {lo, hi}}};
  };
  return {
      cube("S", 0, 10),
      cube("T1", 1, 2),
      cube("T2", 8, 9),
      cube("O1", 4, 6),
      Box{"O2", {{7, 9}, {1, 3}, {0, 10}}},
      Box{"O3", {{2, 3}, {7, 8}, {0, 10}}},
      Box{"O4", {{1, 2}, {1, 2}, {5, 10}}},
      Box{"O5", {{8, 9}, {8, 9}, {0, 5}}},
  };
}

std::string render_svg(const Panel& panel, int width, int height) {
  const double left = 60, right = 140, top = 28, bottom = 36;
  const double pw = width - left - right, ph = height - top - bottom;
  const Eigen::Index K = panel.times.size();

  double t0 = K ? panel.times(0) : 0.0, t1 = K ? panel.times(K - 1) : 1.0;
  if (!(t1 > t0)) t1 = t0 + 1.0;
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& s : panel.series) {
    for (Eigen::Index k = 0; k < s.values.size(); ++k) {
      if (std::isfinite(s.values(k))) {
        lo = std::min(lo, s.values(k));
        hi = std::max(hi, s.values(k));
      }
    }
  }
  for (const auto& b : panel.bands) {
    lo = std::min(lo, b.lo);
    hi = std::max(hi, b.hi);
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  auto X = [&](double t) { return left + (t - t0) / (t1 - t0) * pw; };
  auto Y = [&](double v) { return top + (hi - v) / (hi - lo) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<text x=\"" << left << "\" y=\"18\" font-size=\"13\">" << escape(panel.title) << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << px(pw) << "\" height=\"" << px(ph)
     << "\" fill=\"none\" stroke=\"#888\"/>\n";

  for (const auto& b : panel.bands) {
    os << "<rect x=\"" << left << "\" y=\"" << px(Y(b.hi)) << "\" width=\"" << px(pw) << "\" height=\""
       << px(Y(b.lo) - Y(b.hi)) << "\" fill=\"#f4b6b6\" fill-opacity=\"0.35\"/>\n";
    os << "<text x=\"" << px(left + 4) << "\" y=\"" << px(Y(b.hi) + 11) << "\" fill=\"#a33\">" << escape(b.label)
       << "</text>\n";
  }

  for (int i = 0; i <= 4; ++i) {
    const double t = t0 + (t1 - t0) * i / 4.0, v = lo + (hi - lo) * i / 4.0;
    os << "<text x=\"" << px(X(t)) << "\" y=\"" << px(top + ph + 14) << "\" text-anchor=\"middle\">" << fmt(t)
       << "</text>\n";
    os << "<text x=\"" << px(left - 4) << "\" y=\"" << px(Y(v) + 4) << "\" text-anchor=\"end\">" << fmt(v)
       << "</text>\n";
  }
  os << "<text x=\"" << px(left + pw / 2) << "\" y=\"" << height - 4 << "\" text-anchor=\"middle\">t</text>\n";
  os << "<text x=\"12\" y=\"" << px(top + ph / 2) << "\" transform=\"rotate(-90 12 " << px(top + ph / 2)
     << ")\" text-anchor=\"middle\">" << escape(panel.y_label) << "</text>\n";

  const Eigen::Index stride = std::max<Eigen::Index>(1, K / kMaxPoints);
  for (std::size_t s = 0; s < panel.series.size(); ++s) {
    const auto& series = panel.series[s];
    const char* color = kColors[s % std::size(kColors)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    const Eigen::Index n = std::min(K, series.values.size());
    for (Eigen::Index k = 0; k < n; k += stride) {
      if (std::isfinite(series.values(k))) os << px(X(panel.times(k))) << ',' << px(Y(series.values(k))) << ' ';
    }
    if (n > 0 && (n - 1) % stride != 0 && std::isfinite(series.values(n - 1))) {
      os << px(X(panel.times(n - 1))) << ',' << px(Y(series.values(n - 1)));
    }
    os << "\"/>\n";
    const double ly = top + 12 + 16 * static_cast<double>(s);
    os << "<line x1=\"" << px(left + pw + 10) << "\" y1=\"" << px(ly - 4) << "\" x2=\"" << px(left + pw + 30)
       << "\" y2=\"" << px(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << px(left + pw + 34) << "\" y=\"" << px(ly) << "\">" << escape(series.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string render_html(const std::string& title, const std::vector<Panel>& panels, const std::vector<Box>& boxes) {
  std::ostringstream os;
  os << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>" << escape(title)
     << "</title>\n<style>body{font-family:sans-serif;margin:24px}table{border-collapse:collapse}"
        "td,th{border:1px solid #ccc;padding:2px 8px}</style></head><body>\n";
  os << "<h2>" << escape(title) << "</h2>\n";
  for (const auto& p : panels) os << "<div>" << render_svg(p) << "</div>\n";
  if (!boxes.empty()) {
    os << "<h3>Output-space boxes</h3>\n<table><tr><th>set</th><th>extent</th></tr>\n";
    for (const auto& b : boxes) {
      os << "<tr><td>" << escape(b.name) << "</td><td>";
      for (std::size_t i = 0; i < b.sides.size(); ++i) {
        if (i) os << " &times; ";
        os << '[' << fmt(b.sides[i].first) << ", " << fmt(b.sides[i].second) << ']';
      }
      os << "</td></tr>\n";
    }
    os << "</table>\n";
  }
  os << "</body></html>\n";
  return os.str();
}

}  // namespace netabs
