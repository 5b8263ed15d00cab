#pragma once

#include <array>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmbeam/core/csv.hpp"

namespace mmbeam::data {

// Point cloud row: x, y, z (meters), intensity (unitless).
using Point = std::array<double, 4>;
using PointCloud = std::vector<Point>;

inline void write_pointcloud(const PointCloud& pc, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  for (const Point& p : pc) {
    os << fmt_num(p[0]) << ',' << fmt_num(p[1]) << ',' << fmt_num(p[2]) << ','
       << fmt_num(p[3]) << '\n';
  }
}

inline PointCloud read_pointcloud(const std::string& path) {
  auto rows = read_csv(path);
  PointCloud pc;
  pc.reserve(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != 4)
      throw std::runtime_error(path + ": row " + std::to_string(i + 1) +
                               " must have 4 columns");
    Point p;
    for (int j = 0; j < 4; ++j) p[j] = parse_double(rows[i][j]);
    pc.push_back(p);
  }
  if (pc.empty()) throw std::runtime_error(path + ": empty point cloud");
  return pc;
}

}  // namespace mmbeam::data
