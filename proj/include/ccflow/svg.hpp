#pragma once

// Dependency-free SVG line charts. No timestamps or other run-varying
// content: identical inputs produce identical files.

#include <string>
#include <vector>

namespace ccflow::svg {

struct Series {
  std::string name;
  std::vector<double> ys;
};

void write_line_chart(const std::string& path, const std::string& title, const std::string& x_label,
                      const std::string& y_label, const std::vector<double>& xs, const std::vector<Series>& series);

}  // namespace ccflow::svg
