#include "ddsense/grid_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace ddsense {

namespace {

std::vector<double> parse_numbers(const std::string& line, std::size_t line_no) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
    } catch (const std::exception&) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": '" + cell + "' is not a number");
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_dd_grid(const std::filesystem::path& path, const DdGrid& grid) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# dd grid " << grid.rows() << "x" << grid.cols() << "\n";
  for (Eigen::Index l = 0; l < grid.rows(); ++l) {
    for (Eigen::Index k = 0; k < grid.cols(); ++k) {
      if (k) out << ',';
      out << fmt(grid(l, k).real()) << ',' << fmt(grid(l, k).imag());
    }
    out << '\n';
  }
}

DdGrid read_dd_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    rows.push_back(parse_numbers(line, line_no));
    if (rows.back().size() % 2 != 0) throw std::runtime_error("line " + std::to_string(line_no) + ": odd value count");
    if (rows.back().size() != rows.front().size()) throw std::runtime_error("ragged DD grid file");
  }
  if (rows.empty()) return DdGrid();
  DdGrid grid(Eigen::Index(rows.size()), Eigen::Index(rows.front().size() / 2));
  for (Eigen::Index l = 0; l < grid.rows(); ++l) {
    for (Eigen::Index k = 0; k < grid.cols(); ++k) {
      grid(l, k) = Complex(rows[std::size_t(l)][std::size_t(2 * k)], rows[std::size_t(l)][std::size_t(2 * k + 1)]);
    }
  }
  return grid;
}

void write_measurements(const std::filesystem::path& path, const std::vector<SensingMeasurement<double>>& meas) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "s_x,s_y,r_hat,r_dot_hat,d_dot_hat,sigma_r,sigma_rdot,sigma_ddot\n";
  for (const auto& m : meas) {
    out << fmt(m.tx.x()) << ',' << fmt(m.tx.y()) << ',' << fmt(m.r_hat) << ',' << fmt(m.r_dot_hat) << ','
        << fmt(m.d_dot_hat) << ',' << fmt(m.sigma_r) << ',' << fmt(m.sigma_rdot) << ',' << fmt(m.sigma_ddot) << '\n';
  }
}

std::vector<SensingMeasurement<double>> read_measurements(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<SensingMeasurement<double>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.rfind("s_x", 0) == 0) continue;
    const auto v = parse_numbers(line, line_no);
    if (v.size() != 8) throw std::runtime_error("line " + std::to_string(line_no) + ": expected 8 columns");
    SensingMeasurement<double> m;
    m.tx = Vec2(v[0], v[1]);
    m.r_hat = v[2];
    m.r_dot_hat = v[3];
    m.d_dot_hat = v[4];
    m.sigma_r = v[5];
    m.sigma_rdot = v[6];
    m.sigma_ddot = v[7];
    if (m.sigma_r < 0 || m.sigma_rdot < 0 || m.sigma_ddot < 0)
      throw std::runtime_error("line " + std::to_string(line_no) + ": negative standard deviation");
    out.push_back(m);
  }
  return out;
}

}  // namespace ddsense
