#pragma once

#include <filesystem>
#include <vector>

#include "kalium/io.hpp"

namespace kalium {

// Template overlay: one polyline per series, stroke color graded from blue
// (lowest K) to red (highest K). The plotted points go to csv_path in the
// template-table format. Only data series use <polyline>, so counting them
// in the SVG text is a valid structural check.
void write_template_plot(const std::vector<TemplateSeries>& series,
                         const std::filesystem::path& svg_path,
                         const std::filesystem::path& csv_path);

// Histogram of concentration values (0.25 mmol/l bins, left axis) overlaid
// with the weighting curves for wr in {0, 0.5, 1} (right axis, [0, 1]).
// csv_path receives the plotted points as `series,x,y` rows.
void write_weighting_plot(const std::vector<double>& concentrations,
                          const std::filesystem::path& svg_path,
                          const std::filesystem::path& csv_path);

}  // namespace kalium
