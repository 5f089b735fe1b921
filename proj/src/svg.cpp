#include "backaction/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace backaction::svg {

namespace {

constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 28.0;
constexpr double kBottom = 42.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  if (std::abs(v) < 1e-12)
    v = 0.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

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

// Roughly five ticks at 1, 2 or 5 times a power of ten.
std::vector<double> linear_ticks(double lo, double hi) {
  const double span = hi - lo;
  if (!(span > 0.0))
    return {lo};
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double f : {1.0, 2.0, 5.0, 10.0})
    if (f * mag >= raw) {
      step = f * mag;
      break;
    }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step)
    ticks.push_back(t);
  return ticks;
}

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  bool log = false;

  double map(double v, double a, double b) const {
    const double t = log ? (std::log10(v) - lo) / (hi - lo) : (v - lo) / (hi - lo);
    return a + t * (b - a);
  }
};

Axis make_axis(const std::vector<double>& values, std::optional<std::pair<double, double>> range, bool log,
               bool pad) {
  Axis ax;
  ax.log = log;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  if (range) {
    lo = range->first;
    hi = range->second;
  } else {
    for (double v : values) {
      if (!std::isfinite(v) || (log && v <= 0.0))
        continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!std::isfinite(lo)) {
      lo = log ? 1.0 : 0.0;
      hi = log ? 10.0 : 1.0;
    }
  }
  if (log) {
    lo = std::log10(lo);
    hi = std::log10(hi);
  }
  if (hi <= lo) {
    lo -= 0.5;
    hi += 0.5;
  } else if (pad && !range) {
    const double margin = 0.05 * (hi - lo);
    lo -= margin;
    hi += margin;
  }
  ax.lo = lo;
  ax.hi = hi;
  return ax;
}

std::vector<std::pair<double, std::string>> ticks_for(const Axis& ax) {
  std::vector<std::pair<double, std::string>> out;
  if (ax.log) {
    for (double e = std::ceil(ax.lo); e <= ax.hi + 1e-9; e += 1.0) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "1e%d", static_cast<int>(e));
      out.emplace_back(std::pow(10.0, e), buf);
    }
    return out;
  }
  for (double t : linear_ticks(ax.lo, ax.hi))
    out.emplace_back(t, tick_label(t));
  return out;
}

void render_panel(std::string& out, const Panel& p, double y0, int width, int height) {
  const double x_a = kLeft;
  const double x_b = width - kRight;
  const double y_a = y0 + height - kBottom;  // bottom of the plot area
  const double y_b = y0 + kTop;

  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& s : p.series) {
    xs.insert(xs.end(), s.x.begin(), s.x.end());
    ys.insert(ys.end(), s.y.begin(), s.y.end());
  }
  auto x_range = p.x_range;
  auto y_range = p.y_range;
  if (p.heatmap) {
    if (!x_range)
      x_range = std::pair{p.heatmap->x_min, p.heatmap->x_max};
    if (!y_range)
      y_range = std::pair{0.0, static_cast<double>(p.heatmap->rows)};
  }
  const Axis xa = make_axis(xs, x_range, p.log_x, false);
  const Axis ya = make_axis(ys, y_range, p.log_y, true);

  out += "<g>\n";
  out += "<text x=\"" + num((x_a + x_b) / 2) + "\" y=\"" + num(y0 + 18) +
         "\" text-anchor=\"middle\" font-size=\"13\">" + escape(p.title) + "</text>\n";

  if (p.heatmap) {
    const auto& h = *p.heatmap;
    const double cw = (x_b - x_a) / static_cast<double>(std::max<std::size_t>(h.cols, 1));
    const double rh = (y_a - y_b) / static_cast<double>(std::max<std::size_t>(h.rows, 1));
    for (std::size_t r = 0; r < h.rows; ++r) {
      for (std::size_t c = 0; c < h.cols; ++c) {
        const double v = std::clamp(h.values[r * h.cols + c], 0.0, 1.0);
        if (v < 0.005)
          continue;
        const int shade = static_cast<int>(std::lround(255.0 * (1.0 - v)));
        char color[16];
        std::snprintf(color, sizeof color, "#%02x%02xff", shade, shade);
        out += "<rect x=\"" + num(x_a + cw * static_cast<double>(c)) + "\" y=\"" +
               num(y_b + rh * static_cast<double>(r)) + "\" width=\"" + num(cw + 0.01) + "\" height=\"" +
               num(rh) + "\" fill=\"" + color + "\"/>\n";
      }
      if (r < h.row_labels.size())
        out += "<text x=\"" + num(x_a - 4) + "\" y=\"" + num(y_b + rh * (static_cast<double>(r) + 0.5) + 3) +
               "\" text-anchor=\"end\" font-size=\"9\">" + escape(h.row_labels[r]) + "</text>\n";
    }
  }

  out += "<rect x=\"" + num(x_a) + "\" y=\"" + num(y_b) + "\" width=\"" + num(x_b - x_a) + "\" height=\"" +
         num(y_a - y_b) + "\" fill=\"none\" stroke=\"#000\" stroke-width=\"1\"/>\n";

  for (const auto& [v, label] : ticks_for(xa)) {
    const double x = xa.map(v, x_a, x_b);
    out += "<line x1=\"" + num(x) + "\" y1=\"" + num(y_a) + "\" x2=\"" + num(x) + "\" y2=\"" + num(y_a + 4) +
           "\" stroke=\"#000\"/>\n";
    out += "<text x=\"" + num(x) + "\" y=\"" + num(y_a + 16) + "\" text-anchor=\"middle\" font-size=\"10\">" +
           label + "</text>\n";
  }
  if (!p.heatmap) {
    for (const auto& [v, label] : ticks_for(ya)) {
      const double y = ya.map(v, y_a, y_b);
      out += "<line x1=\"" + num(x_a - 4) + "\" y1=\"" + num(y) + "\" x2=\"" + num(x_a) + "\" y2=\"" + num(y) +
             "\" stroke=\"#000\"/>\n";
      out += "<text x=\"" + num(x_a - 6) + "\" y=\"" + num(y + 3) + "\" text-anchor=\"end\" font-size=\"10\">" +
             label + "</text>\n";
    }
  }
  out += "<text x=\"" + num((x_a + x_b) / 2) + "\" y=\"" + num(y_a + 32) +
         "\" text-anchor=\"middle\" font-size=\"11\">" + escape(p.x_label) + "</text>\n";
  out += "<text transform=\"translate(" + num(16) + "," + num((y_a + y_b) / 2) +
         ") rotate(-90)\" text-anchor=\"middle\" font-size=\"11\">" + escape(p.y_label) + "</text>\n";

  out += "<svg x=\"" + num(x_a) + "\" y=\"" + num(y_b) + "\" width=\"" + num(x_b - x_a) + "\" height=\"" +
         num(y_a - y_b) + "\" viewBox=\"" + num(x_a) + " " + num(y_b) + " " + num(x_b - x_a) + " " +
         num(y_a - y_b) + "\" overflow=\"hidden\">\n";
  for (const auto& s : p.series) {
    const std::size_t n = std::min(s.x.size(), s.y.size());
    auto visible = [&](std::size_t i) {
      return std::isfinite(s.x[i]) && std::isfinite(s.y[i]) && (!p.log_x || s.x[i] > 0.0) &&
             (!p.log_y || s.y[i] > 0.0);
    };
    if (s.mark == Mark::points) {
      out += "<g fill=\"" + s.color + "\">\n";
      for (std::size_t i = 0; i < n; ++i)
        if (visible(i))
          out += "<circle cx=\"" + num(xa.map(s.x[i], x_a, x_b)) + "\" cy=\"" + num(ya.map(s.y[i], y_a, y_b)) +
                 "\" r=\"1.6\"/>\n";
      out += "</g>\n";
    } else {
      out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.4\" points=\"";
      bool first = true;
      for (std::size_t i = 0; i < n; ++i) {
        if (!visible(i))
          continue;
        out += (first ? "" : " ") + num(xa.map(s.x[i], x_a, x_b)) + "," + num(ya.map(s.y[i], y_a, y_b));
        first = false;
      }
      out += "\"/>\n";
    }
  }
  out += "</svg>\n";

  double ly = y_b + 14;
  for (const auto& s : p.series) {
    if (s.label.empty())
      continue;
    out += "<rect x=\"" + num(x_b - 150) + "\" y=\"" + num(ly - 8) + "\" width=\"10\" height=\"8\" fill=\"" +
           s.color + "\"/>\n";
    out += "<text x=\"" + num(x_b - 136) + "\" y=\"" + num(ly) + "\" font-size=\"10\">" + escape(s.label) +
           "</text>\n";
    ly += 13;
  }
  out += "</g>\n";
}

} // namespace

std::string render(std::span<const Panel> panels, int width, int panel_height) {
  const int height = panel_height * static_cast<int>(std::max<std::size_t>(panels.size(), 1));
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
         std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) + " " + std::to_string(height) +
         "\" font-family=\"sans-serif\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
  for (std::size_t i = 0; i < panels.size(); ++i)
    render_panel(out, panels[i], static_cast<double>(i) * panel_height, width, panel_height);
  out += "</svg>\n";
  return out;
}

} // namespace backaction::svg
