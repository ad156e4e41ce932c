#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "overlap_reg/error.hpp"
#include "overlap_reg/point_cloud.hpp"

namespace overlap_reg {

// Exact nearest-neighbor index over a point cloud. Balanced k-d tree with
// median splits on the largest-spread axis and small leaf buckets. Queries
// always return the true nearest point; exact distance ties resolve to the
// lowest point index, so results are identical across runs and thread
// counts. The index is immutable after construction and safe for concurrent
// queries.
class NnIndex {
 public:
  struct Result {
    std::size_t index = 0;
    double distance = 0.0;  // m
  };

  explicit NnIndex(const PointCloud& cloud) : points_(cloud.points) {
    if (points_.empty()) fail(ErrorCode::empty_target, "empty target");
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, static_cast<std::uint32_t>(order_.size()));
  }

  std::size_t size() const { return points_.size(); }

  Result nearest(const Eigen::Vector3d& q) const {
    Best best;
    search(0, q, best);
    return {best.index, std::sqrt(best.dist_sq)};
  }

 private:
  static constexpr std::uint32_t kLeafSize = 16;
  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

  struct Node {
    double split = 0.0;
    std::uint32_t left = kNone;   // kNone marks a leaf
    std::uint32_t right = kNone;
    std::uint32_t begin = 0;      // leaf range into order_
    std::uint32_t end = 0;
    std::int8_t axis = -1;
  };

  struct Best {
    double dist_sq = std::numeric_limits<double>::infinity();
    std::size_t index = 0;
  };

  // Builds the subtree over order_[begin, end); returns its node id.
  std::uint32_t build(std::uint32_t begin, std::uint32_t end) {
    const std::uint32_t id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    if (end - begin <= kLeafSize) {
      nodes_[id].begin = begin;
      nodes_[id].end = end;
      return id;
    }

    Eigen::Vector3d lo = points_[order_[begin]];
    Eigen::Vector3d hi = lo;
    for (std::uint32_t i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);

    const std::uint32_t mid = begin + (end - begin) / 2;
    // Tie-broken comparator keeps the partition deterministic when many
    // coordinates coincide (LiDAR rings, grid-sampled data).
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       const double ca = points_[a][axis];
                       const double cb = points_[b][axis];
                       return ca < cb || (ca == cb && a < b);
                     });

    nodes_[id].axis = static_cast<std::int8_t>(axis);
    nodes_[id].split = points_[order_[mid]][axis];
    const std::uint32_t left = build(begin, mid);
    const std::uint32_t right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void search(std::uint32_t id, const Eigen::Vector3d& q, Best& best) const {
    const Node& node = nodes_[id];
    if (node.left == kNone) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        const double d = (points_[idx] - q).squaredNorm();
        if (d < best.dist_sq || (d == best.dist_sq && idx < best.index)) {
          best.dist_sq = d;
          best.index = idx;
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::uint32_t near = diff < 0.0 ? node.left : node.right;
    const std::uint32_t far = diff < 0.0 ? node.right : node.left;
    search(near, q, best);
    // <= keeps ties exact: an equidistant lower-index point may sit across
    // the splitting plane.
    if (diff * diff <= best.dist_sq) search(far, q, best);
  }

  std::vector<Eigen::Vector3d> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

inline NnIndex build_index(const PointCloud& c) { return NnIndex(c); }

}  // namespace overlap_reg
