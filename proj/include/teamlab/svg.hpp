#pragma once

#include <string>
#include <vector>

namespace teamlab::svg {

struct Series {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;  // NaN entries break the line (gap markers)
};

struct BarSeries {
  std::string label;
  std::vector<double> values;       // one per group
  std::vector<double> half_widths;  // optional CI whiskers (empty = none)
};

// Standalone SVG line chart. Empty or all-gap series produce axes only.
void line_chart(const std::string& path, const std::string& title,
                const std::string& x_label, const std::string& y_label,
                const std::vector<Series>& series);

// Grouped bars with optional error whiskers; supports negative values with a
// zero baseline.
void bar_chart(const std::string& path, const std::string& title,
               const std::string& y_label, const std::vector<std::string>& groups,
               const std::vector<BarSeries>& series);

}  // namespace teamlab::svg
