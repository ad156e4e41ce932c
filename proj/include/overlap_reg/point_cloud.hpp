#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <string>
#include <vector>

#include "overlap_reg/error.hpp"

namespace overlap_reg {

// Ordered set of 3D points in meters, with an optional per-point intensity
// channel. Treated as an immutable value everywhere past construction.
struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<double> intensity;  // empty, or exactly one value per point

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_intensity() const { return !intensity.empty(); }
};

// Enforces the cloud invariants: finite coordinates, matching channel length.
inline void validate(const PointCloud& c, const std::string& what = "point cloud") {
  if (c.has_intensity() && c.intensity.size() != c.points.size()) {
    fail(ErrorCode::invalid_argument,
         what + ": intensity length " + std::to_string(c.intensity.size()) +
             " != point count " + std::to_string(c.points.size()));
  }
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    if (!c.points[i].allFinite()) {
      fail(ErrorCode::invalid_argument,
           what + ": non-finite coordinate at point " + std::to_string(i));
    }
  }
}

}  // namespace overlap_reg
