#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "lfdc/error.hpp"
#include "lfdc/grid.hpp"
#include "lfdc/pde_sim.hpp"

namespace lfdc::io {

/// Shortest text that round-trips through strtod.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw Error(ErrorKind::io, "write failed for " + path.string());
}

/// `x,value` in 1D, `x,y,value` in 2D, cell-center order with x fastest.
inline std::string field_csv(const PeriodicField& f) {
  const PeriodicGrid& g = f.grid();
  std::string out = g.dim() == 1 ? "x,value\n" : "x,y,value\n";
  if (g.dim() == 1) {
    for (std::size_t i = 0; i < g.n(); ++i) out += fmt(g.node(i)) + ',' + fmt(f[i]) + '\n';
  } else {
    for (std::size_t i2 = 0; i2 < g.n(); ++i2)
      for (std::size_t i1 = 0; i1 < g.n(); ++i1)
        out += fmt(g.node(i1)) + ',' + fmt(g.node(i2)) + ',' + fmt(f.at(i1, i2)) + '\n';
  }
  return out;
}

inline void write_field_csv(const std::filesystem::path& path, const PeriodicField& f) {
  write_text(path, field_csv(f));
}

/// Reads a field CSV written by field_csv back onto a grid of matching size.
inline PeriodicField read_field_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  const int dim = line.rfind("x,y,", 0) == 0 ? 2 : 1;
  std::vector<double> values;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    values.push_back(std::strtod(line.c_str() + comma + 1, nullptr));
  }
  std::size_t n = values.size();
  if (dim == 2) {
    n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(values.size()))));
    if (n * n != values.size()) throw Error(ErrorKind::io, path.string() + " is not a square 2D field");
  }
  return PeriodicField(PeriodicGrid(dim, n), std::move(values));
}

/// Time series with columns t,E_L,E_F,KL_L,KL_F,alpha,mass_L,mass_F,lyap_residual.
inline std::string record_csv(const SimRecord& r) {
  std::string out = "t,E_L,E_F,KL_L,KL_F,alpha,mass_L,mass_F,lyap_residual\n";
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    out += fmt(r.times[k]) + ',' + fmt(r.E_L[k]) + ',' + fmt(r.E_F[k]) + ',' + fmt(r.KL_L[k]) + ',' +
           fmt(r.KL_F[k]) + ',' + fmt(r.alpha[k]) + ',' + fmt(r.mass_L[k]) + ',' + fmt(r.mass_F[k]) + ',' +
           fmt(r.lyap_residual[k]) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Static SVG plots

struct Series {
  std::string label;
  std::vector<double> x, y;
};

struct LinePlot {
  std::string title, xlabel, ylabel;
  std::vector<Series> series;
  bool log_y = false;
};

namespace detail {

inline std::string esc(const std::string& s) {
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

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline constexpr std::array<const char*, 6> palette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

// Piecewise-linear approximation of a perceptual dark-to-bright ramp.
inline std::string ramp(double t) {
  static constexpr std::array<std::array<double, 3>, 5> stops{{{68, 1, 84}, {59, 82, 139}, {33, 145, 140},
                                                               {94, 201, 98}, {253, 231, 37}}};
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0) * 4.0;
  const auto i = std::min<std::size_t>(3, static_cast<std::size_t>(t));
  const double f = t - static_cast<double>(i);
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(stops[i][0] + f * (stops[i + 1][0] - stops[i][0])),
                static_cast<int>(stops[i][1] + f * (stops[i + 1][1] - stops[i][1])),
                static_cast<int>(stops[i][2] + f * (stops[i + 1][2] - stops[i][2])));
  return buf;
}

}  // namespace detail

inline std::string line_plot_svg(const LinePlot& p) {
  constexpr double W = 640, H = 400, left = 70, right = 20, top = 40, bottom = 50;
  auto ty = [&](double v) { return p.log_y ? std::log10(std::max(v, 1e-300)) : v; };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : p.series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (p.log_y && s.y[i] <= 0.0)) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1;
  const double pw = W - left - right, ph = H - top - bottom;
  auto sx = [&](double v) { return left + (v - x0) / (x1 - x0) * pw; };
  auto sy = [&](double v) { return top + (1.0 - (ty(v) - y0) / (y1 - y0)) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << detail::esc(p.title)
     << "</text>\n"
     << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    const double px = left + pw * k / 4.0, py = top + ph * (1.0 - k / 4.0);
    os << "<text x=\"" << px << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << detail::tick(xv)
       << "</text>\n<text x=\"" << left - 6 << "\" y=\"" << py + 4 << "\" text-anchor=\"end\">"
       << (p.log_y ? "1e" + detail::tick(yv) : detail::tick(yv)) << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">" << detail::esc(p.xlabel)
     << "</text>\n<text transform=\"translate(16," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << detail::esc(p.ylabel) << "</text>\n";
  for (std::size_t s = 0; s < p.series.size(); ++s) {
    const auto& ser = p.series[s];
    const char* color = detail::palette[s % detail::palette.size()];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < ser.x.size() && i < ser.y.size(); ++i) {
      if (!std::isfinite(ser.y[i]) || (p.log_y && ser.y[i] <= 0.0)) continue;
      os << detail::tick(sx(ser.x[i])) << ',' << detail::tick(sy(ser.y[i])) << ' ';
    }
    os << "\"/>\n<text x=\"" << W - right - 6 << "\" y=\"" << top + 16 + 16 * static_cast<double>(s)
       << "\" text-anchor=\"end\" fill=\"" << color << "\">" << detail::esc(ser.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// Heatmap of nx-by-ny values, row-major with x fastest, y increasing upward.
inline std::string heatmap_svg(const std::string& title, const std::vector<double>& values, std::size_t nx,
                               std::size_t ny, const std::string& xlabel = "x1", const std::string& ylabel = "x2") {
  constexpr double W = 520, H = 480, left = 60, top = 40, side = 380;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values)
    if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  if (!(hi > lo)) hi = lo + 1.0;
  const double cw = side / static_cast<double>(nx), ch = side / static_cast<double>(ny);
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\" shape-rendering=\"crispEdges\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << left + side / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
     << detail::esc(title) << "</text>\n";
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      const double v = values[i + nx * j];
      os << "<rect x=\"" << detail::tick(left + cw * static_cast<double>(i)) << "\" y=\""
         << detail::tick(top + side - ch * static_cast<double>(j + 1)) << "\" width=\"" << detail::tick(cw + 0.05)
         << "\" height=\"" << detail::tick(ch + 0.05) << "\" fill=\"" << detail::ramp((v - lo) / (hi - lo))
         << "\"/>\n";
    }
  for (int k = 0; k <= 10; ++k)
    os << "<rect x=\"" << left + side + 20 << "\" y=\"" << top + side * (1.0 - (k + 1) / 11.0) << "\" width=\"16\" height=\""
       << side / 11.0 << "\" fill=\"" << detail::ramp(k / 10.0) << "\"/>\n";
  os << "<text x=\"" << left + side + 40 << "\" y=\"" << top + 10 << "\">" << detail::tick(hi) << "</text>\n"
     << "<text x=\"" << left + side + 40 << "\" y=\"" << top + side << "\">" << detail::tick(lo) << "</text>\n"
     << "<text x=\"" << left + side / 2 << "\" y=\"" << top + side + 30 << "\" text-anchor=\"middle\">"
     << detail::esc(xlabel) << "</text>\n<text transform=\"translate(20," << top + side / 2
     << ") rotate(-90)\" text-anchor=\"middle\">" << detail::esc(ylabel) << "</text>\n</svg>\n";
  return os.str();
}

inline std::string field_heatmap_svg(const std::string& title, const PeriodicField& f) {
  if (f.grid().dim() != 2) throw Error(ErrorKind::invalid_argument, "heatmap needs a 2D field");
  return heatmap_svg(title, std::vector<double>(f.values().begin(), f.values().end()), f.grid().n(), f.grid().n());
}

}  // namespace lfdc::io
