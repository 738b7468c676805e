#include "reinflow/harness/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "reinflow/errors.hpp"
#include "reinflow/harness/metrics.hpp"

namespace reinflow::harness {

namespace {

constexpr double kWidth = 640.0;
constexpr double kPanelHeight = 260.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 40.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

// Round step to 1, 2 or 5 times a power of ten.
double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  const double nice = f < 1.5 ? 1.0 : f < 3.0 ? 2.0 : f < 7.0 ? 5.0 : 10.0;
  return nice * mag;
}

struct Range {
  double lo;
  double hi;
};

Range padded(double lo, double hi) {
  if (!(hi > lo)) {
    const double pad = std::abs(lo) > 0 ? std::abs(lo) * 0.1 : 1.0;
    return {lo - pad, hi + pad};
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

void panel(std::ostream& os, double y0, const std::string& name, const std::vector<double>& xs,
           const std::vector<double>& ys, const double* reference) {
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kPanelHeight - kTop - kBottom;

  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  std::vector<double> finite_y;
  for (double y : ys) {
    if (std::isfinite(y)) finite_y.push_back(y);
  }
  if (!xs.empty()) {
    xmin = *std::min_element(xs.begin(), xs.end());
    xmax = *std::max_element(xs.begin(), xs.end());
  }
  if (!finite_y.empty()) {
    ymin = *std::min_element(finite_y.begin(), finite_y.end());
    ymax = *std::max_element(finite_y.begin(), finite_y.end());
  }
  if (reference != nullptr && std::isfinite(*reference)) {
    ymin = std::min(ymin, *reference);
    ymax = std::max(ymax, *reference);
  }
  const Range xr = padded(xmin, xmax);
  const Range yr = padded(ymin, ymax);
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
  auto py = [&](double y) { return y0 + kTop + (1.0 - (y - yr.lo) / (yr.hi - yr.lo)) * plot_h; };

  os << "<text x=\"" << num(kLeft) << "\" y=\"" << num(y0 + 18) << "\" font-size=\"14\">" << escape(name)
     << "</text>\n";
  os << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(y0 + kTop) << "\" width=\"" << num(plot_w) << "\" height=\""
     << num(plot_h) << "\" fill=\"none\" stroke=\"#444\"/>\n";

  const double ystep = nice_step(yr.hi - yr.lo, 5);
  for (double t = std::ceil(yr.lo / ystep) * ystep; t <= yr.hi; t += ystep) {
    os << "<line x1=\"" << num(kLeft - 4) << "\" y1=\"" << num(py(t)) << "\" x2=\"" << num(kLeft) << "\" y2=\""
       << num(py(t)) << "\" stroke=\"#444\"/>\n";
    os << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(py(t) + 4) << "\" font-size=\"10\" text-anchor=\"end\">"
       << tick_label(std::abs(t) < 1e-12 * ystep ? 0.0 : t) << "</text>\n";
  }
  const double xstep = nice_step(xr.hi - xr.lo, 6);
  for (double t = std::ceil(xr.lo / xstep) * xstep; t <= xr.hi; t += xstep) {
    const double yb = y0 + kTop + plot_h;
    os << "<line x1=\"" << num(px(t)) << "\" y1=\"" << num(yb) << "\" x2=\"" << num(px(t)) << "\" y2=\""
       << num(yb + 4) << "\" stroke=\"#444\"/>\n";
    os << "<text x=\"" << num(px(t)) << "\" y=\"" << num(yb + 16) << "\" font-size=\"10\" text-anchor=\"middle\">"
       << tick_label(std::abs(t) < 1e-12 * xstep ? 0.0 : t) << "</text>\n";
  }
  os << "<text x=\"" << num(kLeft + plot_w / 2) << "\" y=\"" << num(y0 + kPanelHeight - 6)
     << "\" font-size=\"11\" text-anchor=\"middle\">iter</text>\n";

  if (reference != nullptr && std::isfinite(*reference)) {
    os << "<line class=\"reference\" x1=\"" << num(kLeft) << "\" y1=\"" << num(py(*reference)) << "\" x2=\""
       << num(kLeft + plot_w) << "\" y2=\"" << num(py(*reference))
       << "\" stroke=\"#c0392b\" stroke-dasharray=\"6,4\"/>\n";
    os << "<text x=\"" << num(kLeft + plot_w - 4) << "\" y=\"" << num(py(*reference) - 4)
       << "\" font-size=\"10\" text-anchor=\"end\" fill=\"#c0392b\">pretrained</text>\n";
  }

  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (std::isfinite(ys[i])) pts.emplace_back(px(xs[i]), py(ys[i]));
  }
  if (pts.size() == 1) {
    os << "<circle class=\"series\" cx=\"" << num(pts[0].first) << "\" cy=\"" << num(pts[0].second)
       << "\" r=\"3\" fill=\"#2c3e90\"/>\n";
  } else if (pts.size() > 1) {
    os << "<polyline class=\"series\" fill=\"none\" stroke=\"#2c3e90\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) os << (i ? " " : "") << num(pts[i].first) << ',' << num(pts[i].second);
    os << "\"/>\n";
  }
}

}  // namespace

void emit_plot(const std::filesystem::path& metrics_path, const std::vector<std::string>& columns,
               const std::filesystem::path& out_path, const std::map<std::string, double>& reference_lines) {
  const CsvTable table = read_csv(metrics_path);
  std::vector<std::size_t> idx;
  const bool empty_file = table.header.empty();
  std::optional<std::size_t> iter_col = table.column("iter");
  if (!empty_file) {
    if (!iter_col) throw ConfigError("metrics file has no 'iter' column");
    for (const auto& c : columns) {
      const auto i = table.column(c);
      if (!i) throw ConfigError("metrics file has no column '" + c + "'");
      idx.push_back(*i);
    }
  }

  std::ostringstream os;
  const double height = kPanelHeight * static_cast<double>(std::max<std::size_t>(columns.size(), 1));
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\"" << num(height)
     << "\" viewBox=\"0 0 " << num(kWidth) << ' ' << num(height) << "\" font-family=\"sans-serif\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t p = 0; p < columns.size(); ++p) {
    std::vector<double> xs, ys;
    if (!empty_file) {
      for (const auto& row : table.rows) {
        xs.push_back(row[*iter_col]);
        ys.push_back(row[idx[p]]);
      }
    }
    const auto ref = reference_lines.find(columns[p]);
    panel(os, kPanelHeight * static_cast<double>(p), columns[p], xs, ys,
          ref == reference_lines.end() ? nullptr : &ref->second);
  }
  os << "</svg>\n";

  std::ofstream out(out_path);
  if (!out) throw ConfigError("cannot write plot " + out_path.string());
  out << os.str();
}

}  // namespace reinflow::harness
