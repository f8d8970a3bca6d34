#pragma once

#include <filesystem>
#include <vector>

#include "ddsense/scene.hpp"

namespace ddsense {

/// DD grid as CSV: one line per delay bin, "re,im" pairs per Doppler bin,
/// printed with round-trip precision.
void write_dd_grid(const std::filesystem::path& path, const DdGrid& grid);
DdGrid read_dd_grid(const std::filesystem::path& path);

/// One row per instant:
/// s_x,s_y,r_hat,r_dot_hat,d_dot_hat,sigma_r,sigma_rdot,sigma_ddot
void write_measurements(const std::filesystem::path& path, const std::vector<SensingMeasurement<double>>& meas);
std::vector<SensingMeasurement<double>> read_measurements(const std::filesystem::path& path);

}  // namespace ddsense
