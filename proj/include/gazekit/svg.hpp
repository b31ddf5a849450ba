#pragma once

#include <string>
#include <vector>

#include "gazekit/dataset.hpp"
#include "gazekit/eval.hpp"

namespace gazekit {

/// Bar chart with optional symmetric error bars.
void svg_bar_chart(const std::string& path, const std::string& title,
                   const std::vector<std::string>& labels, const std::vector<double>& values,
                   const std::vector<double>& errors);

/// Binned means as dots with the quadratic fit drawn through them.
void svg_binned_curve(const std::string& path, const std::string& title,
                      const BinnedErrors& binned, const std::string& x_label);

/// Intensity-coded 2D histogram.
void svg_histogram2d(const std::string& path, const std::string& title, const Histogram2D& hist);

void write_report_plots(const std::string& dir, const EvalReport& report);
void write_statistics_plots(const std::string& dir, const DatasetStatistics& stats);

}  // namespace gazekit
