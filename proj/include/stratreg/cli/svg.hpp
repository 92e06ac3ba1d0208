#pragma once

#include <string>
#include <utility>
#include <vector>

namespace stratreg::cli {

struct Bar {
  std::string label;
  double value = 0.0;
};

std::string svg_bar_chart(const std::string& title, const std::vector<Bar>& bars);

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (n, value), both > 0
  bool dashed = false;
};

/// Log–log line plot. Reference slopes are passed as extra dashed series.
std::string svg_loglog_plot(const std::string& title, const std::string& y_label, const std::vector<Series>& series);

}  // namespace stratreg::cli
