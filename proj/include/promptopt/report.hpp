#pragma once

#include <string>
#include <vector>

namespace promptopt {

// Renders a text summary (per-round best prompts with losses, restart points,
// overall best) and an SVG line chart of loss and accuracy versus evaluation
// index with one polyline per run. Both renderings are deterministic:
// re-running on the same trajectories reproduces the bytes.
std::string render_report_text(const std::vector<std::string>& trajectory_paths);
std::string render_report_svg(const std::vector<std::string>& trajectory_paths);

void write_report(const std::vector<std::string>& trajectory_paths,
                  const std::string& text_path, const std::string& svg_path);

}  // namespace promptopt
