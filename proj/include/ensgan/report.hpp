#pragma once

// Human-readable renderings: the comparison table, per-subpopulation curve
// plots and the subpopulation-size chart. Plots are standalone SVG.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ensgan/pipeline.hpp"
#include "ensgan/sweep.hpp"

namespace ensgan {

inline constexpr const char* kNoTargetsMessage = "no underperforming SPs identified";

// "0%", "5%", "150%", "1000%".
std::string fraction_label(double fraction);

// Columns: Use case, Subpopulation, n, SMOTE, RUS, Ens., Ens. GAN. Scores
// with three decimals; missing scores as "NA". The best score of a row is
// starred in the text rendering.
std::string comparison_table_text(const ComparisonTable& table);
std::string comparison_table_csv(const ComparisonTable& table);

struct CurveSeries {
  std::string name;
  std::vector<std::optional<double>> values;  // one per x position
};

// One x position per configured fraction. Fractions without a successful
// point leave a gap and are listed in the plot as missing.
std::vector<CurveSeries> curve_series(const SweepResult& sweep, const std::string& sp,
                                      const std::string& metric);

std::string curve_plot_svg(const std::string& title, const std::vector<double>& fractions,
                           const std::vector<CurveSeries>& series, const std::string& metric);

// Bars in descending size order.
std::string size_chart_svg(const std::string& title,
                           std::vector<std::pair<std::string, std::size_t>> sizes);

// Per-subpopulation sweep listing, one line per configured fraction.
std::string sweep_report_text(const SweepResult& sweep, const std::string& metric);

}  // namespace ensgan
