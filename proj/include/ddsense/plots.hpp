#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ddsense/bench.hpp"

namespace ddsense {

struct PlotStyle {
  int width = 720;
  int height = 440;
  bool log_mse = true;
};

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotData {
  std::string file_stem;
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  std::vector<PlotSeries> series;
};

/// Chart contents per metric: tap MSE, position RMSE, velocity RMSE.
/// Skipped sweep points are left out. Throws on an empty result.
std::vector<PlotData> plot_data(const SweepResult& result, const PlotStyle& style = {});

/// SVG line chart. The plotted numbers are embedded in a <metadata> table
/// so read_plot_data() can recover them.
std::string render_svg(const PlotData& data, const PlotStyle& style = {});

/// Writes one SVG per metric into `dir` and returns the paths.
std::vector<std::filesystem::path> emit_plots(const SweepResult& result, const std::filesystem::path& dir,
                                              const PlotStyle& style = {});

PlotData read_plot_data(const std::filesystem::path& svg);

}  // namespace ddsense
