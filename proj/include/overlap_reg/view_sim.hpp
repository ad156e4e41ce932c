#pragma once

#include <cstdint>
#include <vector>

#include "overlap_reg/fov.hpp"
#include "overlap_reg/omega.hpp"
#include "overlap_reg/point_cloud.hpp"
#include "overlap_reg/rng.hpp"
#include "overlap_reg/transform.hpp"

namespace overlap_reg {

// One simulated sensor placement: pose maps sensor coordinates to world
// coordinates; the frustum is expressed in the sensor frame.
struct ViewSpec {
  RigidTransform pose;  // sensor-to-world
  SensorFov fov;
  double noise_sigma = 0.0;  // m, >= 0
  std::uint64_t rng_seed = 0;
};

inline void validate(const ViewSpec& v) {
  validate(v.fov);
  if (!(v.noise_sigma >= 0.0)) {
    fail(ErrorCode::invalid_argument, "view: noise_sigma must be >= 0");
  }
}

struct SimulatedView {
  PointCloud cloud;         // in the sensor frame
  RigidTransform pose;      // ground truth, sensor-to-world
};

// Observes the world cloud from one sensor placement: transforms the world
// into the sensor frame, hard-culls everything outside the frustum (zero
// penalty only - no soft weighting), then perturbs the survivors with
// isotropic Gaussian noise from the view's seed. Point order is preserved.
inline SimulatedView simulate_view(const PointCloud& world, const ViewSpec& v) {
  validate(v);
  if (world.empty()) fail(ErrorCode::invalid_argument, "simulate_view: empty world");

  const RigidTransform world_to_sensor = v.pose.inverse();
  const PenaltyConstants k;  // membership only; magnitudes are irrelevant

  SimulatedView out;
  out.pose = v.pose;
  const bool has_intensity = world.has_intensity();
  for (std::size_t i = 0; i < world.size(); ++i) {
    const Eigen::Vector3d local = world_to_sensor.apply(world.points[i]);
    if (fov_penalty(local, v.fov, k) != 0.0) continue;
    out.cloud.points.push_back(local);
    if (has_intensity) out.cloud.intensity.push_back(world.intensity[i]);
  }
  if (out.cloud.empty()) fail(ErrorCode::empty_view, "empty view: frustum contains no points");

  if (v.noise_sigma > 0.0) {
    Rng rng = make_rng(v.rng_seed);
    for (auto& p : out.cloud.points) {
      p.x() += normal_double(rng, 0.0, v.noise_sigma);
      p.y() += normal_double(rng, 0.0, v.noise_sigma);
      p.z() += normal_double(rng, 0.0, v.noise_sigma);
    }
  }
  return out;
}

struct ViewSequence {
  std::vector<SimulatedView> views;
  // relative_ground_truth[i] = pose_i^-1 * pose_{i+1}: maps frame i+1
  // coordinates into frame i, i.e. the transform a registrar should recover
  // for the pair (source = view i+1, target = view i).
  std::vector<RigidTransform> relative_ground_truth;
};

inline ViewSequence make_sequence(const PointCloud& world, const std::vector<ViewSpec>& specs) {
  if (specs.size() < 2) fail(ErrorCode::invalid_argument, "make_sequence: need >= 2 views");
  ViewSequence seq;
  seq.views.reserve(specs.size());
  for (const ViewSpec& v : specs) seq.views.push_back(simulate_view(world, v));
  for (std::size_t i = 0; i + 1 < specs.size(); ++i) {
    seq.relative_ground_truth.push_back(specs[i].pose.inverse() * specs[i + 1].pose);
  }
  return seq;
}

// Symmetric overlap measure under a known relative pose t_ab (maps a-frame
// coordinates into b's frame): mean of the in-frustum fractions of a's
// points seen from b and b's points seen from a.
inline double overlap_fraction(const PointCloud& a, const PointCloud& b, const SensorFov& fov_a,
                               const SensorFov& fov_b, const RigidTransform& t_ab) {
  if (a.empty() || b.empty()) fail(ErrorCode::invalid_argument, "overlap_fraction: empty cloud");
  const PenaltyConstants k;
  const RigidTransform t_ba = t_ab.inverse();
  std::size_t in_a = 0;
  for (const auto& p : a.points) {
    if (fov_penalty(t_ab.apply(p), fov_b, k) == 0.0) ++in_a;
  }
  std::size_t in_b = 0;
  for (const auto& p : b.points) {
    if (fov_penalty(t_ba.apply(p), fov_a, k) == 0.0) ++in_b;
  }
  const double frac_a = static_cast<double>(in_a) / static_cast<double>(a.size());
  const double frac_b = static_cast<double>(in_b) / static_cast<double>(b.size());
  return 0.5 * (frac_a + frac_b);
}

// Orbit preset: sensors on a horizontal circle of the given radius, stepping
// in yaw and aimed at the origin (+x looks inward, +z up). The default
// matches the partial-overlap suite: five views, 25-degree steps, a square
// 60-degree frustum.
struct OrbitPreset {
  int num_views = 5;
  double yaw_step_deg = 25.0;
  double fov_deg = 60.0;
  double psi_min = 0.01;
  double psi_max = 10.0;
  double orbit_radius = 2.2;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

inline std::vector<ViewSpec> orbit_views(const OrbitPreset& preset) {
  if (preset.num_views < 2) fail(ErrorCode::invalid_argument, "orbit: need >= 2 views");
  if (!(preset.orbit_radius > 0.0)) {
    fail(ErrorCode::invalid_argument, "orbit: radius must be positive");
  }
  std::vector<ViewSpec> specs;
  specs.reserve(static_cast<std::size_t>(preset.num_views));
  for (int i = 0; i < preset.num_views; ++i) {
    const double yaw = deg_to_rad(preset.yaw_step_deg * i);
    const Eigen::Vector3d position(preset.orbit_radius * std::cos(yaw),
                                   preset.orbit_radius * std::sin(yaw), 0.0);
    const Eigen::Vector3d forward = (-position).normalized();
    const Eigen::Vector3d up_hint(0.0, 0.0, 1.0);
    const Eigen::Vector3d left = up_hint.cross(forward).normalized();
    const Eigen::Vector3d up = forward.cross(left);
    Eigen::Matrix3d rot;
    rot.col(0) = forward;
    rot.col(1) = left;
    rot.col(2) = up;

    ViewSpec v;
    v.pose = RigidTransform(rot, position);
    v.fov = SensorFov::symmetric_deg(preset.fov_deg, preset.psi_min, preset.psi_max);
    v.noise_sigma = preset.noise_sigma;
    v.rng_seed = preset.seed + static_cast<std::uint64_t>(i);
    specs.push_back(v);
  }
  return specs;
}

// Built-in world for synthetic experiments: a star-shaped surface around the
// origin whose radius is modulated by a handful of seeded Gaussian lobes.
// Asymmetric by construction, so registration against it is well-posed.
inline PointCloud make_lumpy_cloud(std::size_t n_points, std::uint64_t seed) {
  if (n_points == 0) fail(ErrorCode::invalid_argument, "make_lumpy_cloud: n_points must be > 0");
  Rng rng = make_rng(seed);

  constexpr int kLobes = 10;
  std::vector<Eigen::Vector3d> lobe_dir(kLobes);
  std::vector<double> lobe_amp(kLobes);
  std::vector<double> lobe_sharp(kLobes);
  for (int j = 0; j < kLobes; ++j) {
    Eigen::Vector3d d(normal_double(rng), normal_double(rng), normal_double(rng));
    lobe_dir[j] = d.normalized();
    lobe_amp[j] = uniform_double(rng, -0.30, 0.45);
    lobe_sharp[j] = uniform_double(rng, 4.0, 18.0);
  }

  PointCloud cloud;
  cloud.points.reserve(n_points);
  while (cloud.points.size() < n_points) {
    Eigen::Vector3d dir(normal_double(rng), normal_double(rng), normal_double(rng));
    const double len = dir.norm();
    if (len < 1e-12) continue;
    dir /= len;
    double radius = 1.0;
    for (int j = 0; j < kLobes; ++j) {
      radius += lobe_amp[j] * std::exp(lobe_sharp[j] * (dir.dot(lobe_dir[j]) - 1.0));
    }
    radius = std::max(radius, 0.2);
    cloud.points.push_back(radius * dir);
  }
  return cloud;
}

}  // namespace overlap_reg
