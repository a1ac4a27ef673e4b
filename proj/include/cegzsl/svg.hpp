#pragma once

#include <string>
#include <vector>

namespace cegzsl::svg {

struct Series {
  std::string name;
  std::vector<double> ys;
};

// Line chart over categorical x positions (one label per point), y in [0, 1].
std::string line_plot(const std::string& title, const std::string& x_label,
                      const std::vector<std::string>& x_ticks, const std::vector<Series>& series);

// values[r][c] in [0, 1]; NaN cells are drawn grey and labelled "n/a".
std::string heatmap(const std::string& title, const std::string& row_label,
                    const std::string& col_label, const std::vector<std::string>& row_ticks,
                    const std::vector<std::string>& col_ticks,
                    const std::vector<std::vector<double>>& values);

}  // namespace cegzsl::svg
