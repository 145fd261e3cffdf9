#include "qrk/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "qrk/error.hpp"

namespace qrk::svg {

namespace {

constexpr double kWidth = 820.0;
constexpr double kHeight = 520.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 230.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Series {
  std::vector<double> x;
  std::vector<double> y;
};

Series series_of(const harness::AggregateCurve& c, Axis axis, bool log_y) {
  Series s;
  s.x.reserve(c.iterations.size() + 1);
  s.y.reserve(c.iterations.size() + 1);
  auto y_of = [log_y](double v) { return log_y ? std::log10(std::max(v, kLogFloor)) : v; };
  s.x.push_back(0.0);
  s.y.push_back(y_of(c.mean_initial_error));
  for (std::size_t i = 0; i < c.iterations.size(); ++i) {
    s.x.push_back(axis == Axis::Iteration ? static_cast<double>(c.iterations[i])
                                          : c.mean_wall_ns[i] * 1e-9);
    s.y.push_back(y_of(c.mean_error[i]));
  }
  return s;
}

}  // namespace

std::string render(const std::vector<harness::AggregateCurve>& curves, Axis axis, bool log_y,
                   const std::string& title) {
  if (curves.empty()) throw Error(ErrorCode::EmptyCurves, "nothing to plot");

  std::vector<Series> all;
  double x_max = 0.0;
  double y_min = std::numeric_limits<double>::infinity();
  double y_max = -std::numeric_limits<double>::infinity();
  for (const auto& c : curves) {
    all.push_back(series_of(c, axis, log_y));
    for (double v : all.back().x) x_max = std::max(x_max, v);
    for (double v : all.back().y) {
      if (!std::isfinite(v)) continue;
      y_min = std::min(y_min, v);
      y_max = std::max(y_max, v);
    }
  }
  if (!std::isfinite(y_min)) y_min = y_max = 0.0;
  if (log_y) {
    y_min = std::floor(y_min);
    y_max = std::ceil(y_max);
  }
  if (y_max - y_min < 1e-12) {
    y_min -= 1.0;
    y_max += 1.0;
  }
  if (x_max <= 0.0) x_max = 1.0;

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + pw * x / x_max; };
  auto py = [&](double y) { return kTop + ph * (1.0 - (y - y_min) / (y_max - y_min)); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty()) {
    os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
       << escape(title) << "</text>\n";
  }

  // Grid and ticks.
  os << "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
  std::vector<std::pair<double, std::string>> yticks;
  if (log_y) {
    const int span = static_cast<int>(y_max - y_min);
    const int step = std::max(1, span / 8);
    for (int e = static_cast<int>(y_min); e <= static_cast<int>(y_max); e += step) {
      yticks.emplace_back(e, "1e" + std::to_string(e));
    }
  } else {
    for (int i = 0; i <= 5; ++i) {
      const double v = y_min + (y_max - y_min) * i / 5.0;
      yticks.emplace_back(v, tick_label(v));
    }
  }
  for (const auto& [v, _] : yticks) {
    os << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(py(v)) << "\" x2=\"" << num(kLeft + pw)
       << "\" y2=\"" << num(py(v)) << "\"/>\n";
  }
  std::vector<double> xticks;
  for (int i = 0; i <= 5; ++i) xticks.push_back(x_max * i / 5.0);
  for (double v : xticks) {
    os << "<line x1=\"" << num(px(v)) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(px(v))
       << "\" y2=\"" << num(kTop + ph) << "\"/>\n";
  }
  os << "</g>\n";
  os << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw)
     << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (const auto& [v, label] : yticks) {
    os << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(py(v) + 4)
       << "\" text-anchor=\"end\">" << label << "</text>\n";
  }
  for (double v : xticks) {
    os << "<text x=\"" << num(px(v)) << "\" y=\"" << num(kTop + ph + 18)
       << "\" text-anchor=\"middle\">" << tick_label(v) << "</text>\n";
  }
  os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 16)
     << "\" text-anchor=\"middle\">" << (axis == Axis::Iteration ? "iteration" : "runtime (s)")
     << "</text>\n";
  os << "<text transform=\"translate(20," << num(kTop + ph / 2)
     << ") rotate(-90)\" text-anchor=\"middle\">" << (log_y ? "mean error (log scale)" : "mean error")
     << "</text>\n";

  // Curves and legend.
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    const bool dashed = curves[i].key.mode == SamplingMode::WithoutReplacement;
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
    if (dashed) os << " stroke-dasharray=\"6,4\"";
    os << " points=\"";
    const Series& s = all[i];
    for (std::size_t j = 0; j < s.x.size(); ++j) {
      if (!std::isfinite(s.y[j])) continue;
      os << num(px(s.x[j])) << ',' << num(py(s.y[j])) << ' ';
    }
    os << "\"/>\n";

    const double ly = kTop + 10 + 18.0 * static_cast<double>(i);
    const double lx = kLeft + pw + 14;
    os << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(lx + 26)
       << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"";
    if (dashed) os << " stroke-dasharray=\"6,4\"";
    os << "/>\n<text x=\"" << num(lx + 32) << "\" y=\"" << num(ly + 4) << "\">"
       << escape(curves[i].key.label()) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void emit_svg(const std::vector<harness::AggregateCurve>& curves, Axis axis, bool log_y,
              const std::filesystem::path& path, const std::string& title) {
  const std::string text = render(curves, axis, log_y, title);
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace qrk::svg
