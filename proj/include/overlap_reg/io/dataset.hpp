#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "overlap_reg/error.hpp"
#include "overlap_reg/io/kitti.hpp"
#include "overlap_reg/io/ply.hpp"
#include "overlap_reg/point_cloud.hpp"
#include "overlap_reg/rng.hpp"

namespace overlap_reg {

// Uniform sample of n points without replacement (identity when the cloud is
// already small enough). Selection order follows the input order, and the
// same seed always picks the same subset.
inline PointCloud downsample_random(const PointCloud& cloud, std::size_t n, std::uint64_t seed) {
  if (n < 1) fail(ErrorCode::invalid_argument, "downsample: n must be >= 1");
  if (cloud.size() <= n) return cloud;

  // Partial Fisher-Yates over an index array, then restore input order.
  std::vector<std::uint32_t> idx(cloud.size());
  std::iota(idx.begin(), idx.end(), 0u);
  Rng rng = make_rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + uniform_index(rng, cloud.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());

  PointCloud out;
  out.points.reserve(n);
  if (cloud.has_intensity()) out.intensity.reserve(n);
  for (std::uint32_t i : idx) {
    out.points.push_back(cloud.points[i]);
    if (cloud.has_intensity()) out.intensity.push_back(cloud.intensity[i]);
  }
  return out;
}

enum class FrameFormat { ply, kitti_bin };

// Ordered list of scan files plus the knobs that shape the evaluation
// protocol: frame stride, per-frame downsampling, and optional ground-truth
// poses with the sensor extrinsic needed to express them in the scan frame.
struct DatasetManifest {
  std::vector<std::string> frames;
  FrameFormat format = FrameFormat::ply;
  std::optional<std::string> gt_poses_path;
  std::optional<std::string> calib_path;  // KITTI Tr line (velodyne -> camera)
  std::size_t stride = 1;
  std::optional<std::size_t> downsample;
  std::uint64_t rng_seed = 0;
};

inline void validate(const DatasetManifest& m) {
  if (m.frames.empty()) fail(ErrorCode::invalid_argument, "manifest: no frames");
  if (m.stride < 1) fail(ErrorCode::invalid_argument, "manifest: stride must be >= 1");
  if (m.downsample && *m.downsample < 1) {
    fail(ErrorCode::invalid_argument, "manifest: downsample target must be >= 1");
  }
}

// Frame indices actually used under the stride (0, stride, 2*stride, ...).
inline std::vector<std::size_t> strided_frames(const DatasetManifest& m) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.frames.size(); i += m.stride) out.push_back(i);
  return out;
}

// Loads one frame, applying the manifest's downsampling. The downsample seed
// mixes in the frame index so frames draw distinct subsets.
inline PointCloud load_frame(const DatasetManifest& m, std::size_t frame_index) {
  if (frame_index >= m.frames.size()) {
    fail(ErrorCode::invalid_argument, "manifest: frame index out of range");
  }
  PointCloud cloud = m.format == FrameFormat::ply ? read_ply(m.frames[frame_index])
                                                  : read_kitti_bin(m.frames[frame_index]);
  if (m.downsample) {
    cloud = downsample_random(cloud, *m.downsample, m.rng_seed + frame_index);
  }
  return cloud;
}

// Ground-truth relative transform for a (target=a, source=b) frame pair, in
// the scan frame. Poses are sensor-to-world (for KITTI: camera-to-world,
// bridged into the Velodyne frame via the calib extrinsic when present).
inline RigidTransform relative_ground_truth(const std::vector<RigidTransform>& poses,
                                            std::size_t frame_a, std::size_t frame_b,
                                            const std::optional<RigidTransform>& velo_to_cam) {
  if (frame_a >= poses.size() || frame_b >= poses.size()) {
    fail(ErrorCode::invalid_argument, "ground truth: frame index beyond pose file");
  }
  RigidTransform rel = poses[frame_a].inverse() * poses[frame_b];
  if (velo_to_cam) rel = velo_to_cam->inverse() * rel * (*velo_to_cam);
  return rel;
}

}  // namespace overlap_reg
