#pragma once

#include <string>
#include <vector>

namespace wakerom {

struct SvgSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

/// Standalone line chart (optionally log-scale y). No plotting dependency;
/// the output is a plain polyline SVG with axis labels and a legend.
void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<SvgSeries>& series, bool log_y);

/// Colored strip of cluster labels over the snapshot index.
void write_label_strip(const std::string& path, const std::string& title,
                       const std::vector<int>& labels, int k);

} // namespace wakerom
