#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "ddsense/types.hpp"

namespace ddsense::test {

inline MatXc random_grid(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  MatXc m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = Complex(g(rng), g(rng));
  return m;
}

inline double rel_err(const MatXc& a, const MatXc& b) {
  const double scale = std::max(b.norm(), 1e-300);
  return (a - b).norm() / scale;
}

inline std::filesystem::path source_dir() { return DDSENSE_SOURCE_DIR; }

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("ddsense_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace ddsense::test
