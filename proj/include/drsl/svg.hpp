#pragma once

#include <string>
#include <vector>

namespace drsl {

// Dependency-free SVG charts. Every function returns a complete, well-formed
// SVG document string.

struct SvgSeries {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;
};

struct SvgPoints {
  std::string label;
  std::string color;
  std::vector<double> xs;
  std::vector<double> ys;
};

std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<SvgSeries>& series);

std::string svg_histogram(const std::string& title, const std::string& x_label,
                          const std::vector<double>& bin_edges,
                          const std::vector<std::vector<double>>& counts,
                          const std::vector<std::string>& labels);

std::string svg_scatter(const std::string& title, const std::string& x_label,
                        const std::string& y_label, const std::vector<SvgPoints>& groups);

}  // namespace drsl
