#pragma once

#include <string>
#include <vector>

namespace rscnet::eval {

struct Series {
  std::string name;
  std::vector<double> values;  // one per category; NaN leaves a gap
};

// Standalone SVG with one line (markers joined) per series over categorical x
// positions.
std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<std::string>& categories, const std::vector<Series>& series);

// Grouped bars; `log_scale` plots log10 of the values.
std::string bar_chart_svg(const std::string& title, const std::string& y_label,
                          const std::vector<std::string>& categories, const std::vector<Series>& series,
                          bool log_scale = false);

}  // namespace rscnet::eval
