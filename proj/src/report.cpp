#include "promptopt/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "promptopt/errors.hpp"
#include "promptopt/trajectory.hpp"

namespace promptopt {

namespace {

struct RoundBest {
  double loss = std::numeric_limits<double>::infinity();
  double accuracy = 0.0;
  std::string prompt;
};

struct RunSeries {
  std::string label;
  std::vector<double> loss;
  std::vector<double> accuracy;
  std::map<int, RoundBest> round_best;            // keyed by round
  std::vector<TrajectoryEvent> restarts;          // in order
  double best_loss = std::numeric_limits<double>::infinity();
  double best_accuracy = 0.0;
  std::string best_prompt;
};

RunSeries load_series(const std::string& path) {
  RunSeries s;
  s.label = std::filesystem::path(path).filename().string();
  for (const TrajectoryEvent& e : read_trajectory_file(path)) {
    if (e.kind == "eval") {
      s.loss.push_back(e.loss);
      s.accuracy.push_back(e.accuracy);
      RoundBest& rb = s.round_best[e.round];
      if (e.loss < rb.loss) {
        rb.loss = e.loss;
        rb.accuracy = e.accuracy;
        rb.prompt = e.prompt;
      }
      if (e.loss < s.best_loss) {
        s.best_loss = e.loss;
        s.best_accuracy = e.accuracy;
        s.best_prompt = e.prompt;
      }
    } else if (e.kind == "restart") {
      s.restarts.push_back(e);
    }
  }
  return s;
}

std::string num(double v, const char* fmt = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

// ---- svg helpers ----

struct Panel {
  double x0, y0, x1, y1;  // plot area, svg coordinates (y grows downward)
  double vmin, vmax;      // value range
  size_t n;               // series length

  double px(size_t i) const {
    if (n <= 1) return x0;
    return x0 + (x1 - x0) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  double py(double v) const {
    if (vmax == vmin) return (y0 + y1) / 2.0;
    return y1 - (y1 - y0) * (v - vmin) / (vmax - vmin);
  }
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

void draw_axes(std::ostringstream& out, const Panel& p, const std::string& title) {
  out << "  <rect x=\"" << num(p.x0, "%.1f") << "\" y=\"" << num(p.y0, "%.1f") << "\" width=\""
      << num(p.x1 - p.x0, "%.1f") << "\" height=\"" << num(p.y1 - p.y0, "%.1f")
      << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";
  out << "  <text x=\"" << num(p.x0, "%.1f") << "\" y=\"" << num(p.y0 - 8, "%.1f")
      << "\" font-family=\"monospace\" font-size=\"13\">" << title << "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = p.vmin + (p.vmax - p.vmin) * t / 4.0;
    const double y = p.py(v);
    out << "  <line x1=\"" << num(p.x0 - 4, "%.1f") << "\" y1=\"" << num(y, "%.2f") << "\" x2=\""
        << num(p.x0, "%.1f") << "\" y2=\"" << num(y, "%.2f") << "\" stroke=\"#333\"/>\n";
    out << "  <text x=\"" << num(p.x0 - 8, "%.1f") << "\" y=\"" << num(y + 4, "%.2f")
        << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"10\">" << num(v, "%.3g")
        << "</text>\n";
  }
}

void draw_polyline(std::ostringstream& out, const Panel& p, const std::vector<double>& values,
                   const char* color) {
  if (values.empty()) return;
  out << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out << ' ';
    out << num(p.px(i), "%.2f") << ',' << num(p.py(values[i]), "%.2f");
  }
  out << "\"/>\n";
}

}  // namespace

std::string render_report_text(const std::vector<std::string>& trajectory_paths) {
  std::ostringstream out;
  for (const std::string& path : trajectory_paths) {
    const RunSeries s = load_series(path);
    out << "run: " << s.label << "\n";
    out << "  evaluations: " << s.loss.size() << "\n";
    int last_restart_round = 0;
    for (const TrajectoryEvent& r : s.restarts)
      last_restart_round = std::max(last_restart_round, r.round);
    for (const auto& [round, rb] : s.round_best) {
      out << "  round " << round;
      if (last_restart_round > 0 && round == last_restart_round + 1) out << " (final)";
      out << ": best loss " << num(rb.loss) << " (accuracy " << num(rb.accuracy, "%.1f")
          << ") prompt \"" << rb.prompt << "\"\n";
    }
    for (const TrajectoryEvent& r : s.restarts) {
      out << "  restart after round " << r.round << " [" << r.origin << "] -> \"" << r.prompt
          << '"';
      if (r.has_score) out << " (loss " << num(r.loss) << ")";
      out << "\n";
    }
    if (!s.loss.empty()) {
      out << "  best overall: loss " << num(s.best_loss) << " (accuracy "
          << num(s.best_accuracy, "%.1f") << ") prompt \"" << s.best_prompt << "\"\n";
    }
    out << "\n";
  }
  return out.str();
}

std::string render_report_svg(const std::vector<std::string>& trajectory_paths) {
  std::vector<RunSeries> runs;
  runs.reserve(trajectory_paths.size());
  size_t max_len = 1;
  double loss_min = std::numeric_limits<double>::infinity(), loss_max = -loss_min;
  for (const std::string& path : trajectory_paths) {
    RunSeries s = load_series(path);
    max_len = std::max(max_len, s.loss.size());
    for (double v : s.loss) {
      loss_min = std::min(loss_min, v);
      loss_max = std::max(loss_max, v);
    }
    runs.push_back(std::move(s));
  }
  if (!std::isfinite(loss_min)) {
    loss_min = 0.0;
    loss_max = 1.0;
  }
  if (loss_min == loss_max) loss_max = loss_min + 1.0;

  const double width = 900, height = 640;
  Panel loss_panel{70, 40, width - 40, 290, loss_min, loss_max, max_len};
  Panel acc_panel{70, 360, width - 40, 610, 0.0, 100.0, max_len};

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  out << "  <rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  draw_axes(out, loss_panel, "loss vs evaluation");
  draw_axes(out, acc_panel, "accuracy (%) vs evaluation");
  for (size_t i = 0; i < runs.size(); ++i) {
    const char* color = kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
    draw_polyline(out, loss_panel, runs[i].loss, color);
    draw_polyline(out, acc_panel, runs[i].accuracy, color);
    out << "  <text x=\"" << num(loss_panel.x0 + 10, "%.1f") << "\" y=\""
        << num(loss_panel.y0 + 16 + 14 * static_cast<double>(i), "%.1f")
        << "\" font-family=\"monospace\" font-size=\"11\" fill=\"" << color << "\">"
        << runs[i].label << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void write_report(const std::vector<std::string>& trajectory_paths, const std::string& text_path,
                  const std::string& svg_path) {
  if (trajectory_paths.empty())
    throw Error(Errc::config, "report needs at least one trajectory file");
  const std::string text = render_report_text(trajectory_paths);
  const std::string svg = render_report_svg(trajectory_paths);
  std::ofstream tf(text_path);
  if (!tf) throw Error(Errc::io, "cannot write " + text_path);
  tf << text;
  if (!tf.flush()) throw Error(Errc::io, "write failure on " + text_path);
  std::ofstream sf(svg_path);
  if (!sf) throw Error(Errc::io, "cannot write " + svg_path);
  sf << svg;
  if (!sf.flush()) throw Error(Errc::io, "write failure on " + svg_path);
}

}  // namespace promptopt
