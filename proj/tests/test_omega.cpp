#include <catch_amalgamated.hpp>

#include "overlap_reg/omega.hpp"
#include "test_util.hpp"

using namespace overlap_reg;
using namespace overlap_reg::testing;

namespace {

SensorFov random_fov(Rng& rng, bool allow_unbounded = true) {
  SensorFov fov;
  fov.psi_min = uniform_double(rng, 0.0, 1.0);
  fov.psi_max = allow_unbounded && uniform_double(rng) < 0.2
                    ? std::numeric_limits<double>::infinity()
                    : fov.psi_min + uniform_double(rng, 0.5, 15.0);
  fov.psi_x = uniform_double(rng, 0.2, kTwoPi);
  fov.psi_y = uniform_double(rng, 0.2, kPi);
  return fov;
}

}  // namespace

TEST_CASE("full-sphere frustum never penalizes", "[omega]") {
  Rng rng = make_rng(41);
  const PointCloud cloud = random_cloud(rng, 2000, 8.0);
  const RigidTransform pose = random_transform(rng, kPi, 3.0);
  const OverlapWeights w =
      calc_omega_weights(cloud, pose, SensorFov::full_sphere(), PenaltyConstants{});
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    REQUIRE(w.penalties[i] == 0.0);
    REQUIRE(w.weights[i] == 1.0);
  }
}

TEST_CASE("range violation charges k0 and decays exponentially", "[omega]") {
  SensorFov fov;
  fov.psi_min = 0.1;
  fov.psi_max = 2.0;
  fov.psi_x = kTwoPi;
  fov.psi_y = kPi;
  PenaltyConstants k;
  k.k0 = 1.0;
  k.k1 = 1.0;
  k.k2 = 5.0;
  PointCloud cloud;
  cloud.points.emplace_back(2.0 * fov.psi_max, 0.0, 0.0);  // angles trivially in-bounds
  const OverlapWeights w = calc_omega_weights(cloud, RigidTransform::identity(), fov, k);
  REQUIRE(w.penalties[0] == 1.0);
  REQUIRE(w.weights[0] == Catch::Approx(6.737946999085467e-3).epsilon(1e-12));
}

TEST_CASE("horizontal overshoot is charged its angular distance", "[omega]") {
  SensorFov fov;
  fov.psi_x = kPi / 2.0;
  fov.psi_y = kPi;
  fov.psi_min = 0.0;
  fov.psi_max = std::numeric_limits<double>::infinity();
  PenaltyConstants k;
  k.k1 = 0.9;
  k.k2 = 3.0;
  const double theta = fov.psi_x / 2.0 + 0.1;
  PointCloud cloud;
  cloud.points.emplace_back(std::cos(theta), std::sin(theta), 0.0);
  const OverlapWeights w = calc_omega_weights(cloud, RigidTransform::identity(), fov, k);
  REQUIRE(w.penalties[0] == Catch::Approx(0.1).margin(1e-12));
  REQUIRE(w.weights[0] == Catch::Approx(0.9 * std::exp(-3.0 * w.penalties[0])).margin(1e-15));
}

TEST_CASE("point at the sensor origin is charged k0, not NaN", "[omega]") {
  PenaltyConstants k;
  k.k0 = 2.5;
  PointCloud cloud;
  cloud.points.emplace_back(0.0, 0.0, 0.0);
  const OverlapWeights w =
      calc_omega_weights(cloud, RigidTransform::identity(), SensorFov::full_sphere(), k);
  REQUIRE(w.penalties[0] == 2.5);
  REQUIRE(std::isfinite(w.weights[0]));
}

TEST_CASE("zero-penalty set matches the membership oracle in both modes", "[omega]") {
  Rng rng = make_rng(42);
  for (int config = 0; config < 100; ++config) {
    const SensorFov fov = random_fov(rng);
    const RigidTransform pose = random_transform(rng, kPi, 2.0);
    const PointCloud cloud = random_cloud(rng, 100, 6.0);
    for (VerticalBoundMode mode : {VerticalBoundMode::verbatim, VerticalBoundMode::corrected}) {
      const OverlapWeights w = calc_omega_weights(cloud, pose, fov, PenaltyConstants{}, mode);
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Eigen::Vector3d local =
            pose.rotation().transpose() * (cloud.points[i] - pose.translation());
        REQUIRE((w.penalties[i] == 0.0) == frustum_contains(local, fov));
      }
    }
  }
}

TEST_CASE("weights obey the exponential law exactly", "[omega]") {
  Rng rng = make_rng(43);
  PenaltyConstants k;
  k.k0 = 1.3;
  k.k1 = 0.8;
  k.k2 = 4.2;
  const SensorFov fov = random_fov(rng, false);
  const RigidTransform pose = random_transform(rng);
  const PointCloud cloud = random_cloud(rng, 5000, 10.0);
  const OverlapWeights w = calc_omega_weights(cloud, pose, fov, k);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (w.penalties[i] == 0.0) {
      REQUIRE(w.weights[i] == 1.0);
    } else {
      REQUIRE(w.weights[i] > 0.0);
      REQUIRE(w.weights[i] <= k.k1);
      REQUIRE(std::abs(w.weights[i] - k.k1 * std::exp(-k.k2 * w.penalties[i])) < 1e-12);
    }
  }
}

TEST_CASE("moving further past an angular bound never raises the weight", "[omega]") {
  SensorFov fov;
  fov.psi_x = deg_to_rad(70.0);
  fov.psi_y = deg_to_rad(50.0);
  fov.psi_min = 0.0;
  fov.psi_max = std::numeric_limits<double>::infinity();
  const PenaltyConstants k;
  double previous = 1.0;
  for (int step = 1; step <= 40; ++step) {
    const double theta = fov.psi_x / 2.0 + step * 0.02;
    if (theta >= kPi) break;
    PointCloud cloud;
    cloud.points.emplace_back(std::cos(theta), std::sin(theta), 0.0);
    const OverlapWeights w = calc_omega_weights(cloud, RigidTransform::identity(), fov, k);
    REQUIRE(w.weights[0] <= previous);
    previous = w.weights[0];
  }
}

TEST_CASE("penalties are invariant to a common rigid motion", "[omega]") {
  Rng rng = make_rng(44);
  for (int trial = 0; trial < 20; ++trial) {
    const SensorFov fov = random_fov(rng, false);
    const RigidTransform pose = random_transform(rng, kPi, 2.0);
    const PointCloud cloud = random_cloud(rng, 200, 5.0);
    const RigidTransform g = random_transform(rng, kPi, 3.0);

    const OverlapWeights base = calc_omega_weights(cloud, pose, fov, PenaltyConstants{});
    const OverlapWeights moved =
        calc_omega_weights(transform_cloud(g, cloud), g * pose, fov, PenaltyConstants{});
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      REQUIRE(std::abs(base.penalties[i] - moved.penalties[i]) < 1e-9);
    }
  }
}

TEST_CASE("permuting the input permutes the output", "[omega]") {
  Rng rng = make_rng(45);
  const SensorFov fov = random_fov(rng, false);
  const RigidTransform pose = random_transform(rng);
  const PointCloud cloud = random_cloud(rng, 300, 5.0);
  PointCloud reversed;
  reversed.points.assign(cloud.points.rbegin(), cloud.points.rend());

  const OverlapWeights a = calc_omega_weights(cloud, pose, fov, PenaltyConstants{});
  const OverlapWeights b = calc_omega_weights(reversed, pose, fov, PenaltyConstants{});
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    REQUIRE(a.weights[i] == b.weights[cloud.size() - 1 - i]);
    REQUIRE(a.penalties[i] == b.penalties[cloud.size() - 1 - i]);
  }
}

TEST_CASE("results do not depend on the worker count", "[omega]") {
  Rng rng = make_rng(46);
  const SensorFov fov = random_fov(rng, false);
  const RigidTransform pose = random_transform(rng);
  const PointCloud cloud = random_cloud(rng, 20000, 5.0);

  set_thread_count(1);
  const OverlapWeights serial = calc_omega_weights(cloud, pose, fov, PenaltyConstants{});
  set_thread_count(4);
  const OverlapWeights parallel = calc_omega_weights(cloud, pose, fov, PenaltyConstants{});
  set_thread_count(0);
  REQUIRE(serial.weights == parallel.weights);
  REQUIRE(serial.penalties == parallel.penalties);
}

TEST_CASE("verbatim lower vertical bound jumps by psi_y; corrected is continuous", "[omega]") {
  SensorFov fov;
  fov.psi_x = kTwoPi;
  fov.psi_y = deg_to_rad(60.0);
  fov.psi_min = 0.0;
  fov.psi_max = std::numeric_limits<double>::infinity();
  const PenaltyConstants k;

  // Polar angle just below pi/2 - psi_y/2: the lower branch (line 19).
  const double phi = kPi / 2.0 - fov.psi_y / 2.0 - 1e-6;
  PointCloud cloud;
  cloud.points.emplace_back(std::sin(phi), 0.0, std::cos(phi));

  const OverlapWeights verbatim = calc_omega_weights(cloud, RigidTransform::identity(), fov, k,
                                                     VerticalBoundMode::verbatim);
  const OverlapWeights corrected = calc_omega_weights(cloud, RigidTransform::identity(), fov, k,
                                                      VerticalBoundMode::corrected);
  // Published arithmetic: the charge is >= psi_y right at the boundary.
  REQUIRE(verbatim.penalties[0] >= fov.psi_y);
  REQUIRE(verbatim.penalties[0] == Catch::Approx(fov.psi_y + 1e-6).margin(1e-9));
  // Corrected branch: the charge is the distance past the bound.
  REQUIRE(corrected.penalties[0] == Catch::Approx(1e-6).margin(1e-9));
  // Both agree the point is outside.
  REQUIRE(verbatim.penalties[0] > 0.0);
  REQUIRE(corrected.penalties[0] > 0.0);

  // The upper branch (line 18) vanishes at its boundary in both modes.
  const double phi_low = kPi / 2.0 + fov.psi_y / 2.0 + 1e-6;
  PointCloud below;
  below.points.emplace_back(std::sin(phi_low), 0.0, std::cos(phi_low));
  const OverlapWeights upper = calc_omega_weights(below, RigidTransform::identity(), fov, k,
                                                  VerticalBoundMode::verbatim);
  REQUIRE(upper.penalties[0] == Catch::Approx(1e-6).margin(1e-9));
}

TEST_CASE("timing probe reports positive, ordered medians", "[omega]") {
  const TimingSample small = weight_timing_probe(1000, 3);
  const TimingSample large = weight_timing_probe(200000, 3);
  REQUIRE(small.n == 1000);
  REQUIRE(small.trial_ms.size() == 3);
  REQUIRE(small.median_ms >= 0.0);
  REQUIRE(large.median_ms > small.median_ms);
}
