#pragma once

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "overlap_reg/error.hpp"
#include "overlap_reg/log.hpp"
#include "overlap_reg/point_cloud.hpp"
#include "overlap_reg/transform.hpp"

namespace overlap_reg {

// KITTI Velodyne scan: packed records of four little-endian IEEE-754 floats
// (x, y, z, intensity), meters. Records with non-finite coordinates are
// dropped; the count is reported through *dropped and the log.
inline PointCloud read_kitti_bin(const std::string& path, std::size_t* dropped = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_error, path + ": cannot open file");
  in.seekg(0, std::ios::end);
  const std::streamoff size = in.tellg();
  in.seekg(0, std::ios::beg);
  if (size % 16 != 0) {
    fail(ErrorCode::parse_error,
         path + ": size " + std::to_string(size) + " is not a multiple of 16 bytes");
  }
  const std::size_t records = static_cast<std::size_t>(size) / 16;
  std::vector<float> raw(records * 4);
  if (records > 0) in.read(reinterpret_cast<char*>(raw.data()), size);
  if (!in) fail(ErrorCode::io_error, path + ": read failed");

  PointCloud cloud;
  cloud.points.reserve(records);
  cloud.intensity.reserve(records);
  std::size_t bad = 0;
  for (std::size_t r = 0; r < records; ++r) {
    const float x = raw[4 * r], y = raw[4 * r + 1], z = raw[4 * r + 2], i = raw[4 * r + 3];
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
      ++bad;
      continue;
    }
    cloud.points.emplace_back(x, y, z);
    cloud.intensity.push_back(i);
  }
  if (bad > 0) {
    log(LogLevel::warn, "%s: dropped %zu records with non-finite coordinates", path.c_str(), bad);
  }
  if (dropped != nullptr) *dropped = bad;
  return cloud;
}

inline void write_kitti_bin(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io_error, path + ": cannot open for writing");
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const float row[4] = {static_cast<float>(cloud.points[i].x()),
                          static_cast<float>(cloud.points[i].y()),
                          static_cast<float>(cloud.points[i].z()),
                          cloud.has_intensity() ? static_cast<float>(cloud.intensity[i]) : 0.0f};
    out.write(reinterpret_cast<const char*>(row), sizeof(row));
  }
  if (!out) fail(ErrorCode::io_error, path + ": write failed");
}

namespace kitti_detail {

inline RigidTransform transform_from_tokens(const std::vector<double>& v, const std::string& path,
                                            std::size_t line_no) {
  Eigen::Matrix3d rot;
  rot << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
  const Eigen::Vector3d t(v[3], v[7], v[11]);
  try {
    return RigidTransform(rot, t);  // repairs small drift, rejects beyond 1e-3
  } catch (const Error& e) {
    fail(ErrorCode::parse_error,
         path + ": line " + std::to_string(line_no) + ": " + e.what());
  }
}

}  // namespace kitti_detail

// KITTI odometry ground truth: one pose per line as 12 whitespace-separated
// reals (row-major 3x4), camera-to-world.
inline std::vector<RigidTransform> read_kitti_poses(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, path + ": cannot open file");
  std::vector<RigidTransform> poses;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::vector<double> vals;
    double v = 0.0;
    while (ls >> v) vals.push_back(v);
    if (vals.size() != 12) {
      fail(ErrorCode::parse_error,
           path + ": line " + std::to_string(line_no) + ": expected 12 values, got " +
               std::to_string(vals.size()));
    }
    poses.push_back(kitti_detail::transform_from_tokens(vals, path, line_no));
  }
  return poses;
}

// Velodyne-to-camera extrinsic from a KITTI odometry calib.txt ("Tr:" line).
inline RigidTransform read_kitti_calib(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, path + ": cannot open file");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.rfind("Tr:", 0) != 0) continue;
    std::istringstream ls(line.substr(3));
    std::vector<double> vals;
    double v = 0.0;
    while (ls >> v) vals.push_back(v);
    if (vals.size() != 12) {
      fail(ErrorCode::parse_error,
           path + ": line " + std::to_string(line_no) + ": Tr needs 12 values, got " +
               std::to_string(vals.size()));
    }
    return kitti_detail::transform_from_tokens(vals, path, line_no);
  }
  fail(ErrorCode::parse_error, path + ": no 'Tr:' calibration line found");
}

}  // namespace overlap_reg
