#include "wglab/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <fmt/format.h>
#include <json.hpp>

#include "wglab/common.hpp"
#include "wglab/experiment.hpp"
#include "wglab/io.hpp"

namespace wglab {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kPanelW = 640.0, kPanelH = 420.0;
constexpr double kLeft = 78.0, kRight = 24.0, kTop = 40.0, kBottom = 56.0;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"};

std::string esc(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

struct Axis {
  bool log = false;
  double lo = 0.0, hi = 1.0;  // in transformed units
  double px0 = 0.0, px1 = 1.0;

  double tf(double v) const { return log ? std::log10(v) : v; }
  bool drawable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }
  double map(double v) const { return px0 + (tf(v) - lo) / (hi - lo) * (px1 - px0); }
};

void fit_range(Axis& a, std::vector<double> vals) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : vals)
    if (a.drawable(v)) {
      lo = std::min(lo, a.tf(v));
      hi = std::max(hi, a.tf(v));
    }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-12) {
    double pad = a.log ? 0.5 : std::max(1e-12, 0.5 * std::abs(lo)) + (lo == 0.0 ? 0.5 : 0.0);
    lo -= pad;
    hi += pad;
  } else if (a.log) {
    lo = std::floor(lo);
    hi = std::ceil(hi);
  } else {
    double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  a.lo = lo;
  a.hi = hi;
}

// Tick positions in data units.
std::vector<double> ticks(const Axis& a) {
  std::vector<double> t;
  if (a.log) {
    int step = std::max(1, static_cast<int>(std::ceil((a.hi - a.lo) / 8.0)));
    for (int e = static_cast<int>(std::ceil(a.lo)); e <= static_cast<int>(std::floor(a.hi)); e += step)
      t.push_back(std::pow(10.0, e));
    return t;
  }
  double span = a.hi - a.lo;
  double raw = span / 6.0;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  for (double v = std::ceil(a.lo / step) * step; v <= a.hi + 1e-9 * step; v += step) t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
  return t;
}

std::string tick_label(const Axis& a, double v) {
  if (a.log) return fmt::format("1e{}", static_cast<int>(std::lround(std::log10(v))));
  return fmt::format("{:.4g}", v);
}

std::string panel(const PlotSpec& p, double ox) {
  Axis ax{p.log_x}, ay{p.log_y};
  std::vector<double> xs, ys;
  for (const auto& s : p.series) {
    xs.insert(xs.end(), s.x.begin(), s.x.end());
    ys.insert(ys.end(), s.y.begin(), s.y.end());
  }
  for (const auto& l : p.hlines) ys.push_back(l.y);
  fit_range(ax, xs);
  fit_range(ay, ys);
  ax.px0 = ox + kLeft;
  ax.px1 = ox + kPanelW - kRight;
  ay.px0 = kPanelH - kBottom;
  ay.px1 = kTop;

  std::string o;
  o += fmt::format("<g font-family=\"sans-serif\" font-size=\"12\">\n");
  o += fmt::format("<text x=\"{:.1f}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n", ox + kPanelW / 2,
                   esc(p.title));
  // Bands first so that lines draw over them.
  for (const auto& b : p.bands) {
    double lo = std::max(ay.tf(std::max(b.lo, ay.log ? 1e-300 : b.lo)), ay.lo), hi = std::min(ay.tf(b.hi), ay.hi);
    if (!(hi > lo)) continue;
    double y0 = ay.px0 + (hi - ay.lo) / (ay.hi - ay.lo) * (ay.px1 - ay.px0);
    double y1 = ay.px0 + (lo - ay.lo) / (ay.hi - ay.lo) * (ay.px1 - ay.px0);
    o += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"#888\" fill-opacity=\"0.18\"/>\n",
                     ax.px0, y0, ax.px1 - ax.px0, y1 - y0);
    o += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" fill=\"#555\">{}</text>\n", ax.px0 + 6, y0 + 14, esc(b.label));
  }
  o += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"none\" stroke=\"#000\"/>\n", ax.px0,
                   ay.px1, ax.px1 - ax.px0, ay.px0 - ay.px1);
  for (double t : ticks(ax)) {
    double x = ax.map(t);
    o += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"#ddd\"/>\n", x, ay.px1, ay.px0);
    o += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", x, ay.px0 + 16, tick_label(ax, t));
  }
  for (double t : ticks(ay)) {
    double y = ay.map(t);
    o += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"#ddd\"/>\n", ax.px0, y, ax.px1);
    o += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{}</text>\n", ax.px0 - 6, y + 4, tick_label(ay, t));
  }
  o += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", (ax.px0 + ax.px1) / 2, kPanelH - 14,
                   esc(p.x_label));
  o += fmt::format("<text transform=\"translate({:.1f},{:.1f}) rotate(-90)\" text-anchor=\"middle\">{}</text>\n", ox + 18,
                   (ay.px0 + ay.px1) / 2, esc(p.y_label));
  for (const auto& l : p.hlines) {
    if (!ay.drawable(l.y)) continue;
    double y = ay.map(l.y);
    if (y < ay.px1 - 0.5 || y > ay.px0 + 0.5) continue;
    o += fmt::format(
        "<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"#000\" stroke-dasharray=\"6,4\"/>\n", ax.px0,
        y, ax.px1);
    o += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{}</text>\n", ax.px1 - 4, y - 4, esc(l.label));
  }
  for (std::size_t k = 0; k < p.series.size(); ++k) {
    const auto& s = p.series[k];
    const char* color = kPalette[k % (sizeof(kPalette) / sizeof(kPalette[0]))];
    std::string pts;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
      if (ax.drawable(s.x[i]) && ay.drawable(s.y[i])) pts += fmt::format("{:.2f},{:.2f} ", ax.map(s.x[i]), ay.map(s.y[i]));
    if (pts.empty()) continue;
    o += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\" points=\"{}\"/>\n", color, pts);
    if (s.markers)
      for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
        if (ax.drawable(s.x[i]) && ay.drawable(s.y[i]))
          o += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2.5\" fill=\"{}\"/>\n", ax.map(s.x[i]), ay.map(s.y[i]), color);
    if (!s.name.empty()) {
      double ly = kTop + 14 + 16.0 * static_cast<double>(k);
      o += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
                       ax.px1 - 150, ly - 4, ax.px1 - 130, color);
      o += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\">{}</text>\n", ax.px1 - 126, ly, esc(s.name));
    }
  }
  o += "</g>\n";
  return o;
}

json plot_json(const PlotSpec& p) {
  json j;
  j["name"] = p.name;
  j["title"] = p.title;
  j["x_label"] = p.x_label;
  j["y_label"] = p.y_label;
  j["log_x"] = p.log_x;
  j["log_y"] = p.log_y;
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  j["series"] = json::array();
  for (const auto& s : p.series) {
    json xs = json::array(), ys = json::array();
    for (double v : s.x) xs.push_back(num(v));
    for (double v : s.y) ys.push_back(num(v));
    j["series"].push_back({{"name", s.name}, {"x", xs}, {"y", ys}, {"markers", s.markers}});
  }
  j["hlines"] = json::array();
  for (const auto& l : p.hlines) j["hlines"].push_back({{"y", num(l.y)}, {"label", l.label}});
  j["bands"] = json::array();
  for (const auto& b : p.bands) j["bands"].push_back({{"lo", num(b.lo)}, {"hi", num(b.hi)}, {"label", b.label}});
  return j;
}

double num_of(const json& v) { return v.is_number() ? v.get<double>() : std::numeric_limits<double>::quiet_NaN(); }

std::string bundle_name(const fs::path& p) {
  fs::path q = p;
  if (q.filename().empty()) q = q.parent_path();
  return q.filename().string();
}

}  // namespace

std::string render_panels(const std::vector<PlotSpec>& panels, const std::string& title) {
  const double W = kPanelW * static_cast<double>(std::max<std::size_t>(1, panels.size()));
  const double top = title.empty() ? 0.0 : 28.0;
  std::string o = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\">\n", W,
      kPanelH + top, W, kPanelH + top);
  o += fmt::format("<rect width=\"{:.0f}\" height=\"{:.0f}\" fill=\"#fff\"/>\n", W, kPanelH + top);
  if (!title.empty())
    o += fmt::format("<text x=\"{:.1f}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>\n",
                     W / 2, esc(title));
  o += fmt::format("<g transform=\"translate(0,{:.0f})\">\n", top);
  for (std::size_t i = 0; i < panels.size(); ++i) o += panel(panels[i], kPanelW * static_cast<double>(i));
  o += "</g>\n</svg>\n";
  return o;
}

std::string render_svg(const PlotSpec& plot) { return render_panels({plot}); }

std::string plots_to_json(const std::vector<PlotSpec>& plots) {
  json j = json::array();
  for (const auto& p : plots) j.push_back(plot_json(p));
  return json{{"plots", j}}.dump(1) + "\n";
}

std::vector<PlotSpec> plots_from_json(const std::string& text) {
  std::vector<PlotSpec> out;
  json j;
  try {
    j = json::parse(text);
    for (const auto& q : j.at("plots")) {
      PlotSpec p;
      p.name = q.at("name").get<std::string>();
      p.title = q.value("title", "");
      p.x_label = q.value("x_label", "");
      p.y_label = q.value("y_label", "");
      p.log_x = q.value("log_x", false);
      p.log_y = q.value("log_y", false);
      for (const auto& s : q.at("series")) {
        PlotSeries ps;
        ps.name = s.value("name", "");
        ps.markers = s.value("markers", false);
        for (const auto& v : s.at("x")) ps.x.push_back(num_of(v));
        for (const auto& v : s.at("y")) ps.y.push_back(num_of(v));
        p.series.push_back(std::move(ps));
      }
      for (const auto& l : q.value("hlines", json::array())) p.hlines.push_back({num_of(l.at("y")), l.value("label", "")});
      for (const auto& b : q.value("bands", json::array()))
        p.bands.push_back({num_of(b.at("lo")), num_of(b.at("hi")), b.value("label", "")});
      out.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::MissingArtifact, std::string("malformed plot description: ") + e.what());
  }
  return out;
}

ReportFiles render_report(const std::vector<fs::path>& bundles, const fs::path& out) {
  if (bundles.empty()) fail(ErrorCode::MissingArtifact, "no result bundles given");
  struct Loaded {
    std::string name, kind, expect;
    std::vector<Verdict> verdicts;
    std::vector<PlotSpec> plots;
    std::string error;
  };
  std::vector<Loaded> loaded;
  for (const auto& b : bundles) {
    Loaded l;
    l.name = bundle_name(b);
    for (const char* f : {"verdicts.json", "config.json"})
      if (!fs::exists(b / f)) fail(ErrorCode::MissingArtifact, fmt::format("{} has no {}", b.string(), f));
    l.verdicts = verdicts_from_json(read_file(b / "verdicts.json"));
    try {
      json c = json::parse(read_file(b / "config.json"));
      const json& cfg = c.contains("config") ? c.at("config") : c;
      l.kind = cfg.value("kind", "");
      if (cfg.contains("sweep")) l.expect = cfg.at("sweep").value("expect", "");
    } catch (const json::exception& e) {
      fail(ErrorCode::MissingArtifact, fmt::format("{}: unreadable config.json: {}", b.string(), e.what()));
    }
    if (fs::exists(b / "plot.json")) l.plots = plots_from_json(read_file(b / "plot.json"));
    if (fs::exists(b / "error.json")) l.error = read_file(b / "error.json");
    loaded.push_back(std::move(l));
  }

  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) fail(ErrorCode::Io, fmt::format("cannot create {}: {}", out.string(), ec.message()));
  ReportFiles rf;
  auto emit = [&](const std::string& name, const std::string& content) {
    write_file_atomic(out / name, content);
    rf.files.push_back(name);
  };
  for (const auto& l : loaded)
    for (const auto& p : l.plots) emit(fmt::format("{}-{}.svg", l.name, p.name), render_svg(p));

  // Paired sweeps: the per-lambda trend of each run in its own panel.
  std::vector<PlotSpec> trend_panels;
  for (const auto& l : loaded) {
    if (l.kind != "resolvent-sweep") continue;
    for (const auto& p : l.plots)
      if (p.name == "trend") {
        PlotSpec q = p;
        q.title = fmt::format("{} ({})", l.name, l.expect);
        trend_panels.push_back(std::move(q));
      }
  }
  if (trend_panels.size() >= 2) emit("sweep-trend-comparison.svg", render_panels(trend_panels, "trend statistic per spectral point"));

  std::string s = fmt::format("{:<24} {:<28} {:<44} {:>13} {:>13}  {}\n", "bundle", "result", "check", "value", "threshold",
                              "verdict");
  std::size_t npass = 0, ntotal = 0;
  for (const auto& l : loaded) {
    for (const auto& v : l.verdicts) {
      s += fmt::format("{:<24} {:<28} {:<44} {:>13.6g} {:>13.6g}  {}\n", l.name, v.label, v.check, v.value, v.threshold,
                       v.pass ? "PASS" : "FAIL");
      ++ntotal;
      npass += v.pass ? 1 : 0;
    }
    if (!l.error.empty()) {
      s += fmt::format("{:<24} {:<28} {:<44} {:>13} {:>13}  {}\n", l.name, "run", "completed", "-", "-", "ERROR");
      ++ntotal;
    }
  }
  s += fmt::format("\n{} of {} checks pass\n", npass, ntotal);
  emit("summary.txt", s);
  rf.summary = s;
  return rf;
}

}  // namespace wglab
