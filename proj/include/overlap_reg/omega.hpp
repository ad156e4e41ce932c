#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <vector>

#include "overlap_reg/fov.hpp"
#include "overlap_reg/parallel.hpp"
#include "overlap_reg/point_cloud.hpp"
#include "overlap_reg/rng.hpp"
#include "overlap_reg/transform.hpp"

namespace overlap_reg {

// Penalty constants of the overlap likelihood field: k0 is the flat charge
// for a range violation, k1 scales and k2 drives the exponential decay of
// the weight of an out-of-view point.
struct PenaltyConstants {
  double k0 = 1.0;  // > 0
  double k1 = 1.0;  // (0, 1]
  double k2 = 5.0;  // > 0
};

inline void validate(const PenaltyConstants& k) {
  if (!(k.k0 > 0.0)) fail(ErrorCode::invalid_argument, "penalty: k0 must be > 0");
  if (!(k.k1 > 0.0 && k.k1 <= 1.0)) fail(ErrorCode::invalid_argument, "penalty: k1 outside (0, 1]");
  if (!(k.k2 > 0.0)) fail(ErrorCode::invalid_argument, "penalty: k2 must be > 0");
}

// The published lower vertical bound charges at least psi_y at the boundary,
// unlike every other bound, which vanishes there. `verbatim` reproduces the
// published arithmetic; `corrected` makes the lower branch continuous like
// the rest.
enum class VerticalBoundMode { verbatim, corrected };

// Field-of-view violation magnitude for a point already expressed in the
// sensor's own frame. Zero iff the point is inside the frustum. A point at
// the exact sensor origin has no defined direction; it is charged the range
// penalty k0 instead of propagating NaN.
inline double fov_penalty(const Eigen::Vector3d& p, const SensorFov& fov,
                          const PenaltyConstants& k,
                          VerticalBoundMode mode = VerticalBoundMode::verbatim) {
  const double d = p.norm();
  if (d == 0.0) return k.k0;

  double xi = 0.0;
  if (d < fov.psi_min || d > fov.psi_max) xi += k.k0;

  double theta = std::atan2(p.y(), p.x());
  if (theta < 0.0) theta += kTwoPi;  // wrap (-pi, pi] to [0, 2*pi)
  const double half_x = fov.psi_x / 2.0;
  if (theta > half_x && theta < kTwoPi - half_x) {
    xi += std::min(theta - half_x, kTwoPi - half_x - theta);
  }

  const double phi = std::acos(std::clamp(p.z() / d, -1.0, 1.0));
  if (2.0 * phi > kPi + fov.psi_y) xi += phi - (kPi / 2.0 + fov.psi_y / 2.0);
  if (2.0 * phi < kPi - fov.psi_y) {
    xi += (mode == VerticalBoundMode::verbatim ? kPi / 2.0 + fov.psi_y / 2.0
                                               : kPi / 2.0 - fov.psi_y / 2.0) -
          phi;
  }
  return xi;
}

inline double penalty_to_weight(double xi, const PenaltyConstants& k) {
  return xi > 0.0 ? k.k1 * std::exp(-k.k2 * xi) : 1.0;
}

// Per-point overlap weights plus the raw penalties they came from.
// weight[i] == 1 exactly when penalty[i] == 0; otherwise
// weight[i] = k1 * exp(-k2 * penalty[i]).
struct OverlapWeights {
  std::vector<double> weights;
  std::vector<double> penalties;

  std::size_t size() const { return weights.size(); }
};

// Summary used in registration traces.
struct WeightStats {
  double min_weight = 1.0;
  double mean_weight = 1.0;
  double fraction_downweighted = 0.0;
};

inline WeightStats summarize(const OverlapWeights& w) {
  WeightStats s;
  if (w.weights.empty()) return s;
  double sum = 0.0;
  std::size_t down = 0;
  for (double v : w.weights) {
    s.min_weight = std::min(s.min_weight, v);
    sum += v;
    if (v < 1.0) ++down;
  }
  s.mean_weight = sum / static_cast<double>(w.weights.size());
  s.fraction_downweighted = static_cast<double>(down) / static_cast<double>(w.weights.size());
  return s;
}

// Overlap estimation over a cloud: each point is projected into the other
// sensor's frame via its estimated pose {R, t} (z -> R^T (z - t)), checked
// against that sensor's frustum, and downweighted exponentially by its
// violation magnitude. Embarrassingly parallel; output order matches input
// order and is identical for any worker count.
inline OverlapWeights calc_omega_weights(const PointCloud& cloud, const RigidTransform& pose,
                                         const SensorFov& fov, const PenaltyConstants& k,
                                         VerticalBoundMode mode = VerticalBoundMode::verbatim) {
  OverlapWeights out;
  out.weights.assign(cloud.size(), 1.0);
  out.penalties.assign(cloud.size(), 0.0);
  const Eigen::Matrix3d rot_t = pose.rotation().transpose();
  const Eigen::Vector3d t = pose.translation();
  parallel_for(cloud.size(), [&](std::size_t i) {
    const Eigen::Vector3d local = rot_t * (cloud.points[i] - t);
    const double xi = fov_penalty(local, fov, k, mode);
    out.penalties[i] = xi;
    out.weights[i] = penalty_to_weight(xi, k);
  });
  return out;
}

// Wall-clock probe of calc_omega_weights on n random points under a random
// pose/frustum; reports the median of `trials` runs.
struct TimingSample {
  std::size_t n = 0;
  double median_ms = 0.0;
  std::vector<double> trial_ms;
};

inline TimingSample weight_timing_probe(std::size_t n, int trials, std::uint64_t seed = 42) {
  if (n < 1) fail(ErrorCode::invalid_argument, "timing probe: n must be >= 1");
  if (trials < 1) fail(ErrorCode::invalid_argument, "timing probe: trials must be >= 1");
  Rng rng = make_rng(seed);
  PointCloud cloud;
  cloud.points.resize(n);
  for (auto& p : cloud.points) {
    p = {uniform_double(rng, -10.0, 10.0), uniform_double(rng, -10.0, 10.0),
         uniform_double(rng, -10.0, 10.0)};
  }
  const RigidTransform pose = RigidTransform::from_angle_axis(
      uniform_double(rng, -kPi, kPi),
      Eigen::Vector3d(normal_double(rng), normal_double(rng), normal_double(rng)),
      Eigen::Vector3d(uniform_double(rng, -2, 2), uniform_double(rng, -2, 2),
                      uniform_double(rng, -2, 2)));
  SensorFov fov;
  fov.psi_min = 0.5;
  fov.psi_max = 12.0;
  fov.psi_x = deg_to_rad(120.0);
  fov.psi_y = deg_to_rad(45.0);
  const PenaltyConstants k;

  TimingSample sample;
  sample.n = n;
  sample.trial_ms.reserve(static_cast<std::size_t>(trials));
  volatile double sink = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto start = std::chrono::steady_clock::now();
    const OverlapWeights w = calc_omega_weights(cloud, pose, fov, k);
    const auto stop = std::chrono::steady_clock::now();
    sink = sink + w.weights[0];
    sample.trial_ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
  }
  std::vector<double> sorted = sample.trial_ms;
  std::sort(sorted.begin(), sorted.end());
  sample.median_ms = sorted[sorted.size() / 2];
  return sample;
}

}  // namespace overlap_reg
