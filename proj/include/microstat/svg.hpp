#ifndef MICROSTAT_SVG_HPP
#define MICROSTAT_SVG_HPP

// Minimal static SVG scatter plots for ordination output.

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace microstat {

struct ScatterPoint {
  double x = 0.0;
  double y = 0.0;
  std::string category; // color key; empty = default
};

inline std::string svg_scatter(const std::vector<ScatterPoint> &points,
                               const std::string &x_label,
                               const std::string &y_label,
                               const std::string &title = "") {
  static const char *kPalette[] = {"#1b6ca8", "#d1495b", "#66a182",
                                   "#edae49", "#8d6a9f", "#00798c",
                                   "#9a8c98", "#3d405b"};
  const double width = 640, height = 480, margin = 56;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (!points.empty()) {
    xmin = xmax = points[0].x;
    ymin = ymax = points[0].y;
    for (const auto &p : points) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
  }
  const double xpad = (xmax - xmin) * 0.05 + 1e-9;
  const double ypad = (ymax - ymin) * 0.05 + 1e-9;
  xmin -= xpad;
  xmax += xpad;
  ymin -= ypad;
  ymax += ypad;
  auto sx = [&](double x) {
    return margin + (x - xmin) / (xmax - xmin) * (width - 2 * margin);
  };
  auto sy = [&](double y) {
    return height - margin -
           (y - ymin) / (ymax - ymin) * (height - 2 * margin);
  };

  std::map<std::string, std::size_t> color_of;
  for (const auto &p : points)
    color_of.emplace(p.category, color_of.size());

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
    out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << title
        << "</text>\n";
  // axes
  out << "<line x1=\"" << margin << "\" y1=\"" << height - margin
      << "\" x2=\"" << width - margin << "\" y2=\"" << height - margin
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\""
      << margin << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 14
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\">"
      << x_label << "</text>\n";
  out << "<text x=\"16\" y=\"" << height / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\" transform=\"rotate(-90 16 "
      << height / 2 << ")\">" << y_label << "</text>\n";
  for (const auto &p : points) {
    const std::size_t ci = color_of[p.category] % 8;
    out << "<circle cx=\"" << sx(p.x) << "\" cy=\"" << sy(p.y)
        << "\" r=\"4\" fill=\"" << kPalette[ci]
        << "\" fill-opacity=\"0.8\"/>\n";
  }
  // legend
  double ly = margin;
  for (const auto &[cat, idx] : color_of) {
    if (cat.empty() && color_of.size() == 1) break;
    out << "<circle cx=\"" << width - margin + 10 << "\" cy=\"" << ly
        << "\" r=\"4\" fill=\"" << kPalette[idx % 8] << "\"/>\n";
    out << "<text x=\"" << width - margin + 20 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\">"
        << (cat.empty() ? "(none)" : cat) << "</text>\n";
    ly += 18;
  }
  out << "</svg>\n";
  return out.str();
}

} // namespace microstat

#endif
