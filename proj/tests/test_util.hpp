#pragma once

// Shared generators and independent oracles for the test suites. Everything
// here must stay independent of the implementation paths it checks: the
// nearest-neighbor oracle is a linear scan, the frustum oracle re-derives
// membership from asin/atan2 directly, and mixture sampling goes through its
// own Cholesky.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "overlap_reg/fov.hpp"
#include "overlap_reg/gmm.hpp"
#include "overlap_reg/point_cloud.hpp"
#include "overlap_reg/rng.hpp"
#include "overlap_reg/transform.hpp"

namespace overlap_reg::testing {

inline PointCloud random_cloud(Rng& rng, std::size_t n, double extent = 1.0) {
  PointCloud c;
  c.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.points.emplace_back(uniform_double(rng, -extent, extent),
                          uniform_double(rng, -extent, extent),
                          uniform_double(rng, -extent, extent));
  }
  return c;
}

inline Eigen::Vector3d random_unit(Rng& rng) {
  for (;;) {
    Eigen::Vector3d v(normal_double(rng), normal_double(rng), normal_double(rng));
    const double len = v.norm();
    if (len > 1e-9) return v / len;
  }
}

inline RigidTransform random_transform(Rng& rng, double max_angle_rad = kPi,
                                       double max_translation = 1.0) {
  const double angle = uniform_double(rng, -max_angle_rad, max_angle_rad);
  const Eigen::Vector3d axis = random_unit(rng);
  const Eigen::Vector3d t(uniform_double(rng, -max_translation, max_translation),
                          uniform_double(rng, -max_translation, max_translation),
                          uniform_double(rng, -max_translation, max_translation));
  return RigidTransform::from_angle_axis(angle, axis, t);
}

// Linear-scan nearest neighbor with the same tie rule the index promises
// (lowest index wins).
inline std::pair<std::size_t, double> brute_force_nearest(const PointCloud& cloud,
                                                          const Eigen::Vector3d& q) {
  std::size_t best = 0;
  double best_sq = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double d = (cloud.points[i] - q).squaredNorm();
    if (d < best_sq) {
      best_sq = d;
      best = i;
    }
  }
  return {best, std::sqrt(best_sq)};
}

// Independent frustum membership: elevation from asin, horizontal angle from
// the untouched atan2 range. A point at the exact origin counts as outside
// (mirrors the documented d == 0 convention).
inline bool frustum_contains(const Eigen::Vector3d& local, const SensorFov& fov) {
  const double d = local.norm();
  if (d == 0.0) return false;
  if (d < fov.psi_min || d > fov.psi_max) return false;
  if (std::abs(std::atan2(local.y(), local.x())) > fov.psi_x / 2.0) return false;
  const double elevation = std::asin(std::clamp(local.z() / d, -1.0, 1.0));
  return std::abs(elevation) <= fov.psi_y / 2.0;
}

// Draws from the mixture's Gaussian components (the outlier component is
// ignored; callers wanting it should sample it themselves).
inline PointCloud sample_mixture(const GaussianMixture& model, std::size_t n, Rng& rng) {
  std::vector<Eigen::Matrix3d> chol(model.component_count());
  for (std::size_t k = 0; k < model.component_count(); ++k) {
    chol[k] = Eigen::LLT<Eigen::Matrix3d>(model.covariances[k]).matrixL();
  }
  double total = 0.0;
  for (double w : model.weights) total += w;

  PointCloud out;
  out.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = uniform_double(rng) * total;
    double run = 0.0;
    std::size_t pick = model.component_count() - 1;
    for (std::size_t k = 0; k < model.component_count(); ++k) {
      run += model.weights[k];
      if (run >= r) {
        pick = k;
        break;
      }
    }
    const Eigen::Vector3d z(normal_double(rng), normal_double(rng), normal_double(rng));
    out.points.push_back(model.means[pick] + chol[pick] * z);
  }
  return out;
}

inline double max_transform_diff(const RigidTransform& a, const RigidTransform& b) {
  return std::max((a.rotation() - b.rotation()).cwiseAbs().maxCoeff(),
                  (a.translation() - b.translation()).cwiseAbs().maxCoeff());
}

// Rotation angle between two rotations, in radians, accurate down to machine
// precision near zero (atan2 of the skew part rather than acos of the trace).
inline double rotation_angle_rad(const RigidTransform& a, const RigidTransform& b) {
  const Eigen::Matrix3d rel = a.rotation().transpose() * b.rotation();
  const Eigen::Vector3d skew(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  return std::atan2(0.5 * skew.norm(), 0.5 * (rel.trace() - 1.0));
}

}  // namespace overlap_reg::testing
