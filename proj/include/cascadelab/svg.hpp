#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cascadelab/eval.hpp"

namespace cascadelab {

/// One plotted line: accuracy (y) against deferral rate (x).
struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

/// Renders a standalone SVG with axes, tick labels and a legend, one
/// polyline per series. Output bytes depend only on the input values.
std::string render_curve_svg(const std::vector<PlotSeries>& series, const std::string& title);

/// Reads one or more curve CSV files (as written by scenario runs) and
/// renders them; every (file, rule) pair becomes one series.
void emit_plot(const std::vector<std::filesystem::path>& curve_csvs,
               const std::filesystem::path& out_svg);

}  // namespace cascadelab
