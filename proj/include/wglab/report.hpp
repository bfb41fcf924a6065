#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace wglab {

struct PlotSeries {
  std::string name;
  std::vector<double> x, y;
  bool markers = false;
};

struct PlotLine {
  double y = 0.0;
  std::string label;
};

// Horizontal band lo <= y <= hi.
struct PlotBand {
  double lo = 0.0, hi = 0.0;
  std::string label;
};

struct PlotSpec {
  std::string name;  // file stem
  std::string title, x_label, y_label;
  bool log_x = false, log_y = false;
  std::vector<PlotSeries> series;
  std::vector<PlotLine> hlines;
  std::vector<PlotBand> bands;
};

// Static SVG line plot. Points that cannot be drawn (non-finite, or
// nonpositive on a log axis) are dropped.
std::string render_svg(const PlotSpec& plot);
// Panels side by side in one picture.
std::string render_panels(const std::vector<PlotSpec>& panels, const std::string& title = "");

std::string plots_to_json(const std::vector<PlotSpec>& plots);
std::vector<PlotSpec> plots_from_json(const std::string& text);

struct ReportFiles {
  std::vector<std::string> files;  // relative to the output directory
  std::string summary;
};

// Reads verdicts.json, config.json and plot.json of each bundle directory and
// writes the plots, a paired trend comparison when several sweeps are given,
// and summary.txt. MissingArtifact for an empty set or an incomplete bundle.
ReportFiles render_report(const std::vector<std::filesystem::path>& bundles, const std::filesystem::path& out);

}  // namespace wglab
