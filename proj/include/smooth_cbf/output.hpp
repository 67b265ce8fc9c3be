#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "smooth_cbf/scenario.hpp"
#include "smooth_cbf/simulation.hpp"

namespace smooth_cbf {

class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest round-trip decimal form; independent of the C locale.
inline std::string format_number(double value) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf.data(), end);
}

struct OutputOptions {
  /// Write measured QP wall times; left empty otherwise so that repeated runs
  /// produce identical files.
  bool include_timing = false;
};

inline std::string trajectory_csv_header(const TrajectoryLog& log) {
  if (log.steps.empty()) return "t,softmin,qp_us\n";
  const StepRecord& first = log.steps.front();
  std::string header = "t";
  for (Eigen::Index i = 0; i < first.state.size(); ++i) header += ",x" + std::to_string(i + 1);
  for (Eigen::Index i = 0; i < first.u.size(); ++i) header += ",u" + std::to_string(i + 1);
  for (Eigen::Index i = 0; i < first.alpha.size(); ++i) header += ",alpha_" + std::to_string(i + 1);
  for (Eigen::Index i = 0; i < first.h.size(); ++i) header += ",h_" + std::to_string(i + 1);
  header += ",softmin,qp_us\n";
  return header;
}

inline std::string trajectory_csv(const TrajectoryLog& log, const OutputOptions& options = {}) {
  std::string out = trajectory_csv_header(log);
  const auto append_vector = [&](const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      out += ',';
      out += format_number(v[i]);
    }
  };
  for (const auto& s : log.steps) {
    out += format_number(s.t);
    append_vector(s.state);
    append_vector(s.u);
    append_vector(s.alpha);
    append_vector(s.h);
    out += ',';
    out += format_number(s.softmin);
    out += ',';
    if (options.include_timing) out += format_number(s.qp_us);
    out += '\n';
  }
  return out;
}

inline nlohmann::json events_json(const Scenario& scenario, const TrajectoryLog& log,
                                  const ContinuityReport& report) {
  using nlohmann::json;
  json doc;
  doc["scenario"] = log.scenario;
  doc["mode"] = to_string(log.mode);
  doc["status"] = to_string(log.status);
  doc["dt"] = log.dt;
  doc["steps"] = log.steps.size();
  json arrivals = json::array();
  for (const auto& a : log.arrivals) {
    arrivals.push_back({{"task", a.task}, {"target", a.target}, {"time", a.time}});
  }
  doc["arrivals"] = arrivals;
  json ends = json::array();
  for (const auto& e : log.transition_ends) ends.push_back({{"task", e.task}, {"time", e.time}});
  doc["transition_ends"] = ends;
  json infeasible = json::array();
  for (const auto& e : log.infeasibilities) {
    json rows = json::array();
    for (const auto& r : e.rows) {
      rows.push_back({{"label", r.label},
                      {"a", std::vector<double>(r.a.data(), r.a.data() + r.a.size())},
                      {"b", r.b}});
    }
    json entry = {{"time", e.time},
                  {"state", std::vector<double>(e.state.data(), e.state.data() + e.state.size())},
                  {"rows", rows}};
    entry["relaxation"] = e.relaxation ? json(*e.relaxation) : json(nullptr);
    infeasible.push_back(entry);
  }
  doc["infeasibilities"] = infeasible;
  doc["continuity"] = {{"max_jump", report.max_jump},
                       {"max_jump_time", report.max_jump_time},
                       {"threshold", report.threshold},
                       {"jump_times", report.jump_times}};
  json columns = json::array();
  for (const auto& b : scenario.reach_barriers) columns.push_back(b.name);
  for (const auto& b : scenario.safety_barriers) columns.push_back(b.name);
  doc["barrier_columns"] = columns;
  return doc;
}

namespace svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

inline constexpr std::array<const char*, 8> kPalette = {
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

struct Frame {
  double x0, x1, y0, y1;
  double width = 720, height = 360, margin = 50;

  [[nodiscard]] double px(double x) const {
    return margin + (x - x0) / (x1 - x0) * (width - 2 * margin);
  }
  [[nodiscard]] double py(double y) const {
    return height - margin - (y - y0) / (y1 - y0) * (height - 2 * margin);
  }
};

inline std::string header(const Frame& f, const std::string& title, const std::string& xlabel,
                          const std::string& ylabel) {
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\"" << f.height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << f.width / 2 << "\" y=\"20\" text-anchor=\"middle\">" << title << "</text>\n";
  o << "<rect x=\"" << f.margin << "\" y=\"" << f.margin << "\" width=\"" << f.width - 2 * f.margin
    << "\" height=\"" << f.height - 2 * f.margin << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<text x=\"" << f.width / 2 << "\" y=\"" << f.height - 10 << "\" text-anchor=\"middle\">"
    << xlabel << "</text>\n";
  o << "<text x=\"14\" y=\"" << f.height / 2 << "\" transform=\"rotate(-90 14 " << f.height / 2
    << ")\" text-anchor=\"middle\">" << ylabel << "</text>\n";
  o << "<text x=\"" << f.margin << "\" y=\"" << f.height - f.margin + 15 << "\">"
    << format_number(f.x0) << "</text>\n";
  o << "<text x=\"" << f.width - f.margin << "\" y=\"" << f.height - f.margin + 15
    << "\" text-anchor=\"end\">" << format_number(f.x1) << "</text>\n";
  o << "<text x=\"" << f.margin - 4 << "\" y=\"" << f.height - f.margin << "\" text-anchor=\"end\">"
    << format_number(f.y0) << "</text>\n";
  o << "<text x=\"" << f.margin - 4 << "\" y=\"" << f.margin + 10 << "\" text-anchor=\"end\">"
    << format_number(f.y1) << "</text>\n";
  return o.str();
}

inline std::string polyline(const Frame& f, const Series& s, const char* color) {
  std::ostringstream o;
  o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    o << format_number(std::round(f.px(s.x[i]) * 100) / 100) << ','
      << format_number(std::round(f.py(s.y[i]) * 100) / 100) << ' ';
  }
  o << "\"/>\n";
  return o.str();
}

inline std::string legend(const Frame& f, const std::vector<Series>& series) {
  std::ostringstream o;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = f.margin + 15 + 15 * static_cast<double>(i);
    o << "<text x=\"" << f.width - f.margin - 6 << "\" y=\"" << y << "\" text-anchor=\"end\" fill=\""
      << kPalette[i % kPalette.size()] << "\">" << series[i].label << "</text>\n";
  }
  return o.str();
}

inline std::string line_plot(const std::string& title, const std::string& ylabel,
                             const std::vector<Series>& series) {
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool first = true;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        x0 = x1 = s.x[i];
        y0 = y1 = s.y[i];
        first = false;
      }
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pad = 0.05 * (y1 - y0);
  const Frame f{x0, x1, y0 - pad, y1 + pad};
  std::string out = header(f, title, "t [s]", ylabel);
  for (std::size_t i = 0; i < series.size(); ++i) {
    out += polyline(f, series[i], kPalette[i % kPalette.size()]);
  }
  out += legend(f, series);
  out += "</svg>\n";
  return out;
}

}  // namespace svg

inline std::string control_svg(const TrajectoryLog& log) {
  std::vector<svg::Series> series;
  if (!log.steps.empty()) {
    for (Eigen::Index j = 0; j < log.steps.front().u.size(); ++j) {
      svg::Series s{"u" + std::to_string(j + 1), {}, {}};
      for (const auto& step : log.steps) {
        s.x.push_back(step.t);
        s.y.push_back(step.u[j]);
      }
      series.push_back(std::move(s));
    }
  }
  return svg::line_plot("control input (" + std::string(to_string(log.mode)) + ")", "u", series);
}

inline std::string alpha_svg(const TrajectoryLog& log, const Scenario& scenario) {
  std::vector<svg::Series> series;
  if (!log.steps.empty()) {
    for (Eigen::Index j = 0; j < log.steps.front().alpha.size(); ++j) {
      svg::Series s{"alpha " + scenario.reach_barriers[static_cast<std::size_t>(j)].name, {}, {}};
      for (const auto& step : log.steps) {
        s.x.push_back(step.t);
        s.y.push_back(step.alpha[j]);
      }
      series.push_back(std::move(s));
    }
  }
  return svg::line_plot("transition weights", "alpha", series);
}

/// Workspace view: zero level sets of every planar barrier and the path.
inline std::string workspace_svg(const TrajectoryLog& log, const Scenario& scenario) {
  if (scenario.workspace_lower.size() != 2) {
    return svg::line_plot("workspace (not planar)", "", {});
  }
  const double x0 = scenario.workspace_lower[0], x1 = scenario.workspace_upper[0];
  const double y0 = scenario.workspace_lower[1], y1 = scenario.workspace_upper[1];
  svg::Frame f{x0, x1, y0, y1};
  f.width = 100 + 600 * std::min(2.0, (x1 - x0) / (y1 - y0));
  f.height = 700;
  std::string out = svg::header(f, "workspace", "x [m]", "y [m]");

  // Level sets traced by sampling the boundary angle in each barrier's frame.
  const auto outline = [&](const Barrier& barrier) -> std::vector<std::pair<double, double>> {
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i <= 240; ++i) {
      const double th = 2.0 * std::numbers::pi * i / 240.0;
      if (const auto* e = std::get_if<EllipsoidBarrier>(&barrier)) {
        pts.emplace_back(e->center()[0] + e->semi_axes()[0] * std::cos(th),
                         e->center()[1] + e->semi_axes()[1] * std::sin(th));
      } else if (const auto* s = std::get_if<SuperellipseObstacleBarrier>(&barrier)) {
        const double c = std::cos(th), sn = std::sin(th);
        const double r = s->offset() / std::pow(std::pow(std::abs(c), s->exponent()) +
                                                    std::pow(std::abs(sn), s->exponent()),
                                                1.0 / s->exponent());
        const double bx = s->sigma()[0] * r * c, by = s->sigma()[1] * r * sn;
        const double cr = std::cos(s->rotation()), sr = std::sin(s->rotation());
        pts.emplace_back(s->center()[0] + cr * bx - sr * by, s->center()[1] + sr * bx + cr * by);
      }
    }
    return pts;
  };
  const auto draw = [&](const NamedBarrier& nb, const char* fill) {
    const auto pts = outline(nb.barrier);
    if (pts.empty()) return;
    std::ostringstream o;
    o << "<polygon fill=\"" << fill << "\" fill-opacity=\"0.35\" stroke=\"black\" points=\"";
    double cx = 0, cy = 0;
    for (const auto& [px, py] : pts) {
      o << format_number(std::round(f.px(px) * 100) / 100) << ','
        << format_number(std::round(f.py(py) * 100) / 100) << ' ';
      cx += px;
      cy += py;
    }
    cx /= static_cast<double>(pts.size());
    cy /= static_cast<double>(pts.size());
    o << "\"/>\n<text x=\"" << f.px(cx) << "\" y=\"" << f.py(cy) << "\" text-anchor=\"middle\">"
      << nb.name << "</text>\n";
    out += o.str();
  };
  for (const auto& nb : scenario.reach_barriers) draw(nb, "#2ca02c");
  for (const auto& nb : scenario.safety_barriers) draw(nb, "#d62728");

  svg::Series path{"path", {}, {}};
  for (const auto& step : log.steps) {
    const Eigen::VectorXd p = scenario.barrier_state(step.state);
    path.x.push_back(p[0]);
    path.y.push_back(p[1]);
  }
  out += svg::polyline(f, path, "#1f77b4");
  out += "</svg>\n";
  return out;
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw OutputError("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw OutputError("failed writing " + path.string());
}

}  // namespace detail

/// Writes trajectory.csv, events.json, control.svg, workspace.svg, alpha.svg.
inline std::vector<std::filesystem::path> emit_outputs(const Scenario& scenario,
                                                       const TrajectoryLog& log,
                                                       const ContinuityReport& report,
                                                       const std::filesystem::path& out_dir,
                                                       const OutputOptions& options = {}) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw OutputError("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written = {
      out_dir / "trajectory.csv", out_dir / "events.json", out_dir / "control.svg",
      out_dir / "workspace.svg", out_dir / "alpha.svg"};
  detail::write_file(written[0], trajectory_csv(log, options));
  detail::write_file(written[1], events_json(scenario, log, report).dump(2) + "\n");
  detail::write_file(written[2], control_svg(log));
  detail::write_file(written[3], workspace_svg(log, scenario));
  detail::write_file(written[4], alpha_svg(log, scenario));
  return written;
}

}  // namespace smooth_cbf
