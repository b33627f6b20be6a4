#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "offalign/errors.hpp"

namespace offalign {

// Minimal self-contained SVG charts (no external fonts or scripts). Enough
// for the benchmark exports: multi-series line charts with optional log axes
// and grouped bar charts.
namespace svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  int width = 760;
  int height = 480;
};

namespace detail {

inline const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Scale {
  double lo = 0.0, hi = 1.0;
  bool log = false;
  double px0 = 0.0, px1 = 1.0;

  double to_px(double v) const {
    double t;
    if (log) {
      t = (std::log10(v) - std::log10(lo)) / (std::log10(hi) - std::log10(lo));
    } else {
      t = (v - lo) / (hi - lo);
    }
    return px0 + t * (px1 - px0);
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      const int e0 = static_cast<int>(std::floor(std::log10(lo)));
      const int e1 = static_cast<int>(std::ceil(std::log10(hi)));
      for (int e = e0; e <= e1; ++e) {
        const double v = std::pow(10.0, e);
        if (v >= lo * (1 - 1e-12) && v <= hi * (1 + 1e-12)) out.push_back(v);
      }
      if (out.size() < 2) { out = {lo, hi}; }
    } else {
      for (int i = 0; i <= 5; ++i) out.push_back(lo + (hi - lo) * i / 5.0);
    }
    return out;
  }
};

}  // namespace detail

inline void write_line_chart(const std::string& path, const std::vector<Series>& series,
                             const ChartOptions& opt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("write_line_chart: cannot open " + path);

  double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (opt.log_x && !(s.x[i] > 0.0)) continue;
      if (opt.log_y && !(s.y[i] > 0.0)) continue;
      x_lo = std::min(x_lo, s.x[i]); x_hi = std::max(x_hi, s.x[i]);
      y_lo = std::min(y_lo, s.y[i]); y_hi = std::max(y_hi, s.y[i]);
    }
  if (x_lo > x_hi) { x_lo = 0; x_hi = 1; y_lo = 0; y_hi = 1; }
  if (x_lo == x_hi) { x_hi = x_lo + 1; }
  if (y_lo == y_hi) { y_hi = y_lo + (opt.log_y ? y_lo : 1.0); }
  if (!opt.log_y) {
    const double pad = 0.05 * (y_hi - y_lo);
    y_lo -= pad; y_hi += pad;
  }

  const double ml = 70, mr = 160, mt = 40, mb = 55;
  detail::Scale xs{x_lo, x_hi, opt.log_x, ml, opt.width - mr};
  detail::Scale ys{y_lo, y_hi, opt.log_y, static_cast<double>(opt.height - mb), mt};

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\""
      << opt.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << opt.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << opt.title << "</text>\n";

  for (double t : xs.ticks()) {
    const double px = xs.to_px(t);
    out << "<line x1=\"" << px << "\" y1=\"" << mt << "\" x2=\"" << px << "\" y2=\""
        << opt.height - mb << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << px << "\" y=\"" << opt.height - mb + 18
        << "\" text-anchor=\"middle\">" << detail::num(t) << "</text>\n";
  }
  for (double t : ys.ticks()) {
    const double py = ys.to_px(t);
    out << "<line x1=\"" << ml << "\" y1=\"" << py << "\" x2=\"" << opt.width - mr << "\" y2=\""
        << py << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << ml - 6 << "\" y=\"" << py + 4 << "\" text-anchor=\"end\">"
        << detail::num(t) << "</text>\n";
  }
  out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << opt.width - mr - ml
      << "\" height=\"" << opt.height - mb - mt << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  out << "<text x=\"" << (ml + opt.width - mr) / 2 << "\" y=\"" << opt.height - 12
      << "\" text-anchor=\"middle\">" << opt.x_label << "</text>\n";
  out << "<text x=\"18\" y=\"" << (mt + opt.height - mb) / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << (mt + opt.height - mb) / 2 << ")\">" << opt.y_label << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = detail::kPalette[k % 8];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (opt.log_x && !(s.x[i] > 0.0)) continue;
      if (opt.log_y && !(s.y[i] > 0.0)) continue;
      out << xs.to_px(s.x[i]) << "," << ys.to_px(s.y[i]) << " ";
    }
    out << "\"/>\n";
    const double ly = mt + 16.0 * static_cast<double>(k);
    out << "<line x1=\"" << opt.width - mr + 10 << "\" y1=\"" << ly << "\" x2=\""
        << opt.width - mr + 34 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << opt.width - mr + 40 << "\" y=\"" << ly + 4 << "\">" << s.name
        << "</text>\n";
  }
  out << "</svg>\n";
}

struct BarGroup {
  std::string name;          // series label (one color)
  std::vector<double> values;  // one value per category
};

inline void write_grouped_bar_chart(const std::string& path,
                                    const std::vector<std::string>& categories,
                                    const std::vector<BarGroup>& groups,
                                    const ChartOptions& opt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("write_grouped_bar_chart: cannot open " + path);

  double y_hi = 0.0;
  for (const auto& g : groups)
    for (double v : g.values) y_hi = std::max(y_hi, v);
  if (y_hi <= 0.0) y_hi = 1.0;
  y_hi *= 1.1;

  const double ml = 70, mr = 160, mt = 40, mb = 55;
  const double plot_w = opt.width - ml - mr, plot_h = opt.height - mt - mb;
  const std::size_t C = categories.size(), G = std::max<std::size_t>(groups.size(), 1);
  const double slot = plot_w / static_cast<double>(C);
  const double bar = slot * 0.8 / static_cast<double>(G);

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\""
      << opt.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << opt.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << opt.title << "</text>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = y_hi * i / 5.0;
    const double py = mt + plot_h * (1.0 - v / y_hi);
    out << "<line x1=\"" << ml << "\" y1=\"" << py << "\" x2=\"" << opt.width - mr << "\" y2=\""
        << py << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << ml - 6 << "\" y=\"" << py + 4 << "\" text-anchor=\"end\">"
        << detail::num(v) << "</text>\n";
  }
  for (std::size_t c = 0; c < C; ++c) {
    const double x0 = ml + slot * (static_cast<double>(c) + 0.1);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const double v = groups[g].values.at(c);
      const double h = plot_h * (v / y_hi);
      out << "<rect x=\"" << x0 + bar * static_cast<double>(g) << "\" y=\"" << mt + plot_h - h
          << "\" width=\"" << bar * 0.92 << "\" height=\"" << h << "\" fill=\""
          << detail::kPalette[g % 8] << "\"/>\n";
    }
    out << "<text x=\"" << ml + slot * (static_cast<double>(c) + 0.5) << "\" y=\""
        << opt.height - mb + 18 << "\" text-anchor=\"middle\">" << categories[c] << "</text>\n";
  }
  out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << plot_w << "\" height=\""
      << plot_h << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  out << "<text x=\"" << (ml + opt.width - mr) / 2 << "\" y=\"" << opt.height - 12
      << "\" text-anchor=\"middle\">" << opt.x_label << "</text>\n";
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double ly = mt + 16.0 * static_cast<double>(g);
    out << "<rect x=\"" << opt.width - mr + 10 << "\" y=\"" << ly - 8
        << "\" width=\"12\" height=\"12\" fill=\"" << detail::kPalette[g % 8] << "\"/>\n";
    out << "<text x=\"" << opt.width - mr + 28 << "\" y=\"" << ly + 3 << "\">" << groups[g].name
        << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace svg
}  // namespace offalign
