#pragma once

// Static HTML/SVG line plots. No scripts, no external resources.

#include <string>
#include <vector>

#include "netabs/matgeo.hpp"

namespace netabs {

struct Series {
  std::string label;
  Vector values;  // same length as the panel's time axis
};

/// Horizontal band [lo, hi] drawn behind the series.
struct Band {
  std::string label;
  double lo = 0.0;
  double hi = 0.0;
};

struct Panel {
  std::string title;
  std::string y_label;
  Vector times;
  std::vector<Series> series;
  std::vector<Band> bands;
};

/// Axis-aligned box in output space, recorded as metadata only.
struct Box {
  std::string name;
  std::vector<std::pair<double, double>> sides;
};

/// The target and obstacle boxes of the three-output aggregation example.
std::vector<Box> case_study_boxes();

/// One SVG element, `width` x `height` pixels.
std::string render_svg(const Panel& panel, int width = 720, int height = 300);

/// Full HTML document: a title, every panel, then a table of `boxes`.
std::string render_html(const std::string& title, const std::vector<Panel>& panels, const std::vector<Box>& boxes);

}  // namespace netabs
