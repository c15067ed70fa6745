#include "drsl/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace drsl {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 420;
constexpr int kMarginLeft = 64;
constexpr int kMarginRight = 150;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 52;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string escape_xml(const std::string& s) {
  std::string out;
  out.reserve(s.size());
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

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

struct Range {
  double lo = 0.0, hi = 1.0;

  void expand(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (hi <= lo) hi = lo + 1.0;
    const double margin = 0.05 * (hi - lo);
    lo -= margin;
    hi += margin;
  }
};

class Canvas {
 public:
  Canvas(const std::string& title, const std::string& x_label, const std::string& y_label,
         Range xr, Range yr)
      : xr_(xr), yr_(yr) {
    os_ << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    os_ << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
    os_ << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\" "
           "font-family=\"sans-serif\">"
        << escape_xml(title) << "</text>\n";
    // axes
    os_ << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kHeight - kMarginBottom << "\" x2=\""
        << kWidth - kMarginRight << "\" y2=\"" << kHeight - kMarginBottom
        << "\" stroke=\"black\"/>\n";
    os_ << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop << "\" x2=\"" << kMarginLeft
        << "\" y2=\"" << kHeight - kMarginBottom << "\" stroke=\"black\"/>\n";
    os_ << "<text x=\"" << (kMarginLeft + kWidth - kMarginRight) / 2 << "\" y=\"" << kHeight - 12
        << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">"
        << escape_xml(x_label) << "</text>\n";
    os_ << "<text x=\"16\" y=\"" << (kMarginTop + kHeight - kMarginBottom) / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\" "
           "transform=\"rotate(-90 16 "
        << (kMarginTop + kHeight - kMarginBottom) / 2 << ")\">" << escape_xml(y_label)
        << "</text>\n";
    ticks();
  }

  double px(double x) const {
    return kMarginLeft + (x - xr_.lo) / (xr_.hi - xr_.lo) *
                             (kWidth - kMarginLeft - kMarginRight);
  }
  double py(double y) const {
    return kHeight - kMarginBottom -
           (y - yr_.lo) / (yr_.hi - yr_.lo) * (kHeight - kMarginTop - kMarginBottom);
  }

  void polyline(const std::vector<double>& xs, const std::vector<double>& ys,
                const std::string& color) {
    os_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) {
      os_ << fmt(px(xs[i])) << "," << fmt(py(ys[i])) << " ";
    }
    os_ << "\"/>\n";
  }

  void circles(const std::vector<double>& xs, const std::vector<double>& ys,
               const std::string& color, double r = 3.0) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      os_ << "<circle cx=\"" << fmt(px(xs[i])) << "\" cy=\"" << fmt(py(ys[i])) << "\" r=\"" << r
          << "\" fill=\"" << color << "\" fill-opacity=\"0.7\"/>\n";
    }
  }

  void rect(double x0, double x1, double y, const std::string& color) {
    const double top = py(y);
    const double bottom = py(yr_.lo > 0 ? yr_.lo : 0.0);
    os_ << "<rect x=\"" << fmt(px(x0)) << "\" y=\"" << fmt(top) << "\" width=\""
        << fmt(px(x1) - px(x0)) << "\" height=\"" << fmt(std::max(0.0, bottom - top))
        << "\" fill=\"" << color << "\" fill-opacity=\"0.55\" stroke=\"none\"/>\n";
  }

  void legend(const std::vector<std::pair<std::string, std::string>>& entries) {
    double y = kMarginTop + 10;
    for (const auto& [label, color] : entries) {
      os_ << "<rect x=\"" << kWidth - kMarginRight + 12 << "\" y=\"" << y - 9
          << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
      os_ << "<text x=\"" << kWidth - kMarginRight + 30 << "\" y=\"" << y + 2
          << "\" font-size=\"11\" font-family=\"sans-serif\">" << escape_xml(label)
          << "</text>\n";
      y += 18;
    }
  }

  std::string finish() {
    os_ << "</svg>\n";
    return os_.str();
  }

 private:
  void ticks() {
    for (int i = 0; i <= 4; ++i) {
      const double xv = xr_.lo + (xr_.hi - xr_.lo) * i / 4.0;
      const double yv = yr_.lo + (yr_.hi - yr_.lo) * i / 4.0;
      os_ << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << kHeight - kMarginBottom + 16
          << "\" text-anchor=\"middle\" font-size=\"10\" font-family=\"sans-serif\">" << fmt(xv)
          << "</text>\n";
      os_ << "<text x=\"" << kMarginLeft - 6 << "\" y=\"" << fmt(py(yv) + 3)
          << "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">" << fmt(yv)
          << "</text>\n";
    }
  }

  Range xr_, yr_;
  std::ostringstream os_;
};

}  // namespace

std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<SvgSeries>& series) {
  Range xr{1e300, -1e300}, yr{1e300, -1e300};
  for (const auto& s : series) {
    for (double x : s.xs) xr.expand(x);
    for (double y : s.ys) yr.expand(y);
  }
  if (series.empty()) {
    xr = {0, 1};
    yr = {0, 1};
  }
  const bool non_negative = yr.lo >= 0.0;
  xr.pad();
  yr.pad();
  if (non_negative && yr.lo < 0.0) yr.lo = 0.0;
  Canvas canvas(title, x_label, y_label, xr, yr);
  std::vector<std::pair<std::string, std::string>> legend;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::string color = kPalette[i % kPaletteSize];
    canvas.polyline(series[i].xs, series[i].ys, color);
    canvas.circles(series[i].xs, series[i].ys, color);
    legend.emplace_back(series[i].label, color);
  }
  canvas.legend(legend);
  return canvas.finish();
}

std::string svg_histogram(const std::string& title, const std::string& x_label,
                          const std::vector<double>& bin_edges,
                          const std::vector<std::vector<double>>& counts,
                          const std::vector<std::string>& labels) {
  Range xr{1e300, -1e300}, yr{0, 0};
  for (double e : bin_edges) xr.expand(e);
  for (const auto& c : counts) {
    for (double v : c) yr.expand(v);
  }
  xr.pad();
  yr.pad();
  yr.lo = 0.0;
  Canvas canvas(title, x_label, "count", xr, yr);
  std::vector<std::pair<std::string, std::string>> legend;
  for (std::size_t g = 0; g < counts.size(); ++g) {
    const std::string color = kPalette[g % kPaletteSize];
    for (std::size_t b = 0; b + 1 < bin_edges.size() && b < counts[g].size(); ++b) {
      if (counts[g][b] > 0) canvas.rect(bin_edges[b], bin_edges[b + 1], counts[g][b], color);
    }
    if (g < labels.size()) legend.emplace_back(labels[g], color);
  }
  canvas.legend(legend);
  return canvas.finish();
}

std::string svg_scatter(const std::string& title, const std::string& x_label,
                        const std::string& y_label, const std::vector<SvgPoints>& groups) {
  Range xr{1e300, -1e300}, yr{1e300, -1e300};
  for (const auto& g : groups) {
    for (double x : g.xs) xr.expand(x);
    for (double y : g.ys) yr.expand(y);
  }
  if (groups.empty()) {
    xr = {0, 1};
    yr = {0, 1};
  }
  xr.pad();
  yr.pad();
  Canvas canvas(title, x_label, y_label, xr, yr);
  std::vector<std::pair<std::string, std::string>> legend;
  for (const auto& g : groups) {
    canvas.circles(g.xs, g.ys, g.color, 2.5);
    legend.emplace_back(g.label, g.color);
  }
  canvas.legend(legend);
  return canvas.finish();
}

}  // namespace drsl
