#include "teamlab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace teamlab::svg {

namespace {

constexpr double kWidth = 960;
constexpr double kHeight = 540;
constexpr double kLeft = 70;
constexpr double kRight = 200;  // room for the legend
constexpr double kTop = 50;
constexpr double kBottom = 60;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string esc(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;
  bool seen = false;

  void add(double v) {
    if (!std::isfinite(v)) return;
    if (!seen) {
      lo = hi = v;
      seen = true;
    } else {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  void finish() {
    if (!seen) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi == lo) {
      hi += 0.5;
      lo -= 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
};

class Canvas {
 public:
  Canvas(const std::string& path, const std::string& title) : path_(path) {
    out_ << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
         << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' '
         << kHeight << "\" font-family=\"sans-serif\">\n";
    out_ << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out_ << "<text x=\"" << kWidth / 2 << "\" y=\"28\" font-size=\"18\" "
            "text-anchor=\"middle\">"
         << esc(title) << "</text>\n";
  }

  std::ostringstream& os() { return out_; }

  void axes(const Range& xr, const Range& yr, const std::string& x_label,
            const std::string& y_label, bool numeric_x) {
    const double x0 = kLeft;
    const double x1 = kWidth - kRight;
    const double y0 = kHeight - kBottom;
    const double y1 = kTop;
    out_ << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1
         << "\" y2=\"" << y0 << "\" stroke=\"black\"/>\n";
    out_ << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0
         << "\" y2=\"" << y1 << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double fy = yr.lo + (yr.hi - yr.lo) * t / 4.0;
      const double py = map_y(fy, yr);
      out_ << "<line x1=\"" << x0 - 4 << "\" y1=\"" << py << "\" x2=\"" << x0
           << "\" y2=\"" << py << "\" stroke=\"black\"/>\n";
      out_ << "<text x=\"" << x0 - 8 << "\" y=\"" << py + 4
           << "\" font-size=\"11\" text-anchor=\"end\">" << num(fy) << "</text>\n";
      if (numeric_x) {
        const double fx = xr.lo + (xr.hi - xr.lo) * t / 4.0;
        const double px = map_x(fx, xr);
        out_ << "<line x1=\"" << px << "\" y1=\"" << y0 << "\" x2=\"" << px
             << "\" y2=\"" << y0 + 4 << "\" stroke=\"black\"/>\n";
        out_ << "<text x=\"" << px << "\" y=\"" << y0 + 18
             << "\" font-size=\"11\" text-anchor=\"middle\">" << num(fx)
             << "</text>\n";
      }
    }
    out_ << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 14
         << "\" font-size=\"13\" text-anchor=\"middle\">" << esc(x_label)
         << "</text>\n";
    out_ << "<text x=\"18\" y=\"" << (y0 + y1) / 2
         << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
         << (y0 + y1) / 2 << ")\">" << esc(y_label) << "</text>\n";
  }

  void legend(const std::vector<std::string>& labels) {
    const double lx = kWidth - kRight + 16;
    double ly = kTop + 10;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      out_ << "<rect x=\"" << lx << "\" y=\"" << ly - 9 << "\" width=\"12\" "
              "height=\"12\" fill=\""
           << kPalette[i % kPaletteSize] << "\"/>\n";
      out_ << "<text x=\"" << lx + 18 << "\" y=\"" << ly + 2
           << "\" font-size=\"12\">" << esc(labels[i]) << "</text>\n";
      ly += 20;
    }
  }

  static double map_x(double v, const Range& r) {
    return kLeft + (v - r.lo) / (r.hi - r.lo) * (kWidth - kLeft - kRight);
  }
  static double map_y(double v, const Range& r) {
    return (kHeight - kBottom) - (v - r.lo) / (r.hi - r.lo) * (kHeight - kTop - kBottom);
  }

  void write() {
    out_ << "</svg>\n";
    std::ofstream f(path_, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write chart: " + path_);
    f << out_.str();
    if (!f) throw std::runtime_error("failed writing chart: " + path_);
  }

 private:
  std::string path_;
  std::ostringstream out_;
};

}  // namespace

void line_chart(const std::string& path, const std::string& title,
                const std::string& x_label, const std::string& y_label,
                const std::vector<Series>& series) {
  Range xr, yr;
  for (const auto& s : series) {
    if (s.xs.size() != s.ys.size()) {
      throw std::invalid_argument("series \"" + s.label + "\" has mismatched x/y sizes");
    }
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (std::isfinite(s.ys[i])) {
        xr.add(s.xs[i]);
        yr.add(s.ys[i]);
      }
    }
  }
  xr.finish();
  yr.finish();

  Canvas canvas(path, title);
  canvas.axes(xr, yr, x_label, y_label, true);
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    labels.push_back(s.label);
    bool open = false;
    std::ostringstream& os = canvas.os();
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (!std::isfinite(s.ys[i])) {
        if (open) {
          os << "\"/>\n";
          open = false;
        }
        continue;
      }
      if (!open) {
        os << "<polyline fill=\"none\" stroke=\"" << kPalette[k % kPaletteSize]
           << "\" stroke-width=\"1.6\" points=\"";
        open = true;
      }
      os << Canvas::map_x(s.xs[i], xr) << ',' << Canvas::map_y(s.ys[i], yr) << ' ';
    }
    if (open) os << "\"/>\n";
  }
  canvas.legend(labels);
  canvas.write();
}

void bar_chart(const std::string& path, const std::string& title,
               const std::string& y_label, const std::vector<std::string>& groups,
               const std::vector<BarSeries>& series) {
  Range yr;
  yr.add(0.0);
  for (const auto& s : series) {
    if (s.values.size() != groups.size()) {
      throw std::invalid_argument("bar series \"" + s.label + "\" has " +
                                  std::to_string(s.values.size()) + " values for " +
                                  std::to_string(groups.size()) + " groups");
    }
    if (!s.half_widths.empty() && s.half_widths.size() != s.values.size()) {
      throw std::invalid_argument("bar series \"" + s.label +
                                  "\" whisker count mismatch");
    }
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      const double hw = s.half_widths.empty() ? 0.0 : s.half_widths[i];
      yr.add(s.values[i] - hw);
      yr.add(s.values[i] + hw);
    }
  }
  yr.finish();

  Range xr;
  xr.lo = 0.0;
  xr.hi = 1.0;
  xr.seen = true;

  Canvas canvas(path, title);
  canvas.axes(xr, yr, "", y_label, false);
  std::ostringstream& os = canvas.os();

  const double plot_w = kWidth - kLeft - kRight;
  const std::size_t g = groups.size();
  const std::size_t k = std::max<std::size_t>(series.size(), 1);
  const double group_w = g > 0 ? plot_w / static_cast<double>(g) : plot_w;
  const double bar_w = 0.8 * group_w / static_cast<double>(k);
  const double base_y = Canvas::map_y(0.0, yr);

  os << "<line x1=\"" << kLeft << "\" y1=\"" << base_y << "\" x2=\""
     << kWidth - kRight << "\" y2=\"" << base_y
     << "\" stroke=\"#aaaaaa\" stroke-dasharray=\"4 3\"/>\n";

  for (std::size_t gi = 0; gi < g; ++gi) {
    const double gx = kLeft + group_w * (static_cast<double>(gi) + 0.1);
    for (std::size_t si = 0; si < series.size(); ++si) {
      const double v = series[si].values[gi];
      if (!std::isfinite(v)) continue;
      const double x = gx + bar_w * static_cast<double>(si);
      const double vy = Canvas::map_y(v, yr);
      const double top = std::min(vy, base_y);
      const double h = std::fabs(vy - base_y);
      os << "<rect x=\"" << x << "\" y=\"" << top << "\" width=\"" << bar_w * 0.92
         << "\" height=\"" << h << "\" fill=\"" << kPalette[si % kPaletteSize]
         << "\"/>\n";
      if (!series[si].half_widths.empty() && series[si].half_widths[gi] > 0.0) {
        const double hw = series[si].half_widths[gi];
        const double cx = x + bar_w * 0.46;
        const double y1 = Canvas::map_y(v - hw, yr);
        const double y2 = Canvas::map_y(v + hw, yr);
        os << "<line x1=\"" << cx << "\" y1=\"" << y1 << "\" x2=\"" << cx
           << "\" y2=\"" << y2 << "\" stroke=\"black\" stroke-width=\"1.2\"/>\n";
        os << "<line x1=\"" << cx - 4 << "\" y1=\"" << y1 << "\" x2=\"" << cx + 4
           << "\" y2=\"" << y1 << "\" stroke=\"black\" stroke-width=\"1.2\"/>\n";
        os << "<line x1=\"" << cx - 4 << "\" y1=\"" << y2 << "\" x2=\"" << cx + 4
           << "\" y2=\"" << y2 << "\" stroke=\"black\" stroke-width=\"1.2\"/>\n";
      }
    }
    os << "<text x=\"" << gx + 0.4 * group_w << "\" y=\"" << kHeight - kBottom + 18
       << "\" font-size=\"11\" text-anchor=\"middle\">" << esc(groups[gi])
       << "</text>\n";
  }

  std::vector<std::string> labels;
  for (const auto& s : series) labels.push_back(s.label);
  canvas.legend(labels);
  canvas.write();
}

}  // namespace teamlab::svg
