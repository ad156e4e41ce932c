#include <catch_amalgamated.hpp>

#include "overlap_reg/horn.hpp"
#include "test_util.hpp"

using namespace overlap_reg;
using namespace overlap_reg::testing;

namespace {

CorrespondenceSet identity_pairs(std::size_t n, double weight = 1.0) {
  CorrespondenceSet corr;
  for (std::size_t i = 0; i < n; ++i) corr.push_back({i, i, weight, 0.0});
  return corr;
}

}  // namespace

TEST_CASE("aligning a cloud with itself yields identity", "[horn]") {
  Rng rng = make_rng(31);
  const PointCloud c = random_cloud(rng, 40);
  const RigidTransform t = weighted_horn(c, c, identity_pairs(c.size()));
  REQUIRE(max_transform_diff(t, RigidTransform::identity()) < 1e-12);
}

TEST_CASE("recovers a known transform from noise-free pairs", "[horn]") {
  Rng rng = make_rng(32);
  for (int trial = 0; trial < 50; ++trial) {
    const PointCloud src = random_cloud(rng, 100, 2.0);
    const RigidTransform truth = random_transform(rng, kPi, 3.0);
    const PointCloud dst = transform_cloud(truth, src);
    const RigidTransform got = weighted_horn(src, dst, identity_pairs(src.size()));
    REQUIRE(rotation_angle_rad(got, truth) < 1e-9);
    REQUIRE((got.translation() - truth.translation()).norm() < 1e-9);
  }
}

TEST_CASE("zero-weight outliers are provably ignored", "[horn]") {
  Rng rng = make_rng(33);
  PointCloud src = random_cloud(rng, 60, 1.5);
  const RigidTransform truth = random_transform(rng, kPi / 2, 1.0);
  PointCloud dst = transform_cloud(truth, src);

  // Corrupt one target point grossly.
  dst.points[7] += Eigen::Vector3d(25.0, -13.0, 8.0);

  CorrespondenceSet with_zero = identity_pairs(src.size());
  with_zero[7].weight = 0.0;
  const RigidTransform masked = weighted_horn(src, dst, with_zero);
  REQUIRE(rotation_angle_rad(masked, truth) < 1e-9);
  REQUIRE((masked.translation() - truth.translation()).norm() < 1e-9);

  const RigidTransform polluted = weighted_horn(src, dst, identity_pairs(src.size()));
  REQUIRE(transform_delta(polluted, truth).translation_m > 1e-3);

  // Removing the zero-weight pair entirely changes nothing.
  CorrespondenceSet removed = with_zero;
  removed.erase(removed.begin() + 7);
  const RigidTransform dropped = weighted_horn(src, dst, removed);
  REQUIRE(max_transform_diff(masked, dropped) < 1e-12);
}

TEST_CASE("uniform weight scaling leaves the optimum unchanged", "[horn]") {
  Rng rng = make_rng(34);
  const PointCloud src = random_cloud(rng, 50, 2.0);
  const RigidTransform truth = random_transform(rng);
  PointCloud dst = transform_cloud(truth, src);
  for (auto& p : dst.points) {
    p += Eigen::Vector3d(normal_double(rng, 0, 0.01), normal_double(rng, 0, 0.01),
                         normal_double(rng, 0, 0.01));
  }

  CorrespondenceSet corr;
  for (std::size_t i = 0; i < src.size(); ++i) {
    corr.push_back({i, i, uniform_double(rng, 0.1, 1.0), 0.0});
  }
  const RigidTransform a = weighted_horn(src, dst, corr);
  CorrespondenceSet scaled = corr;
  for (auto& p : scaled) p.weight *= 0.25;  // stays within [0,1]
  const RigidTransform b = weighted_horn(src, dst, scaled);
  REQUIRE(max_transform_diff(a, b) < 1e-12);
}

TEST_CASE("returned transform is a local optimum of the weighted objective", "[horn]") {
  Rng rng = make_rng(35);
  const PointCloud src = random_cloud(rng, 40, 2.0);
  PointCloud dst = transform_cloud(random_transform(rng), src);
  for (auto& p : dst.points) {
    p += Eigen::Vector3d(normal_double(rng, 0, 0.05), normal_double(rng, 0, 0.05),
                         normal_double(rng, 0, 0.05));
  }
  CorrespondenceSet corr;
  for (std::size_t i = 0; i < src.size(); ++i) {
    corr.push_back({i, i, uniform_double(rng, 0.2, 1.0), 0.0});
  }
  const RigidTransform best = weighted_horn(src, dst, corr);
  const double at_best = alignment_objective(src, dst, corr, best);
  REQUIRE(at_best <= alignment_objective(src, dst, corr, RigidTransform::identity()) + 1e-12);
  for (int p = 0; p < 100; ++p) {
    const RigidTransform perturbed =
        best * RigidTransform::from_angle_axis(uniform_double(rng, -0.02, 0.02), random_unit(rng),
                                               {normal_double(rng, 0, 0.01),
                                                normal_double(rng, 0, 0.01),
                                                normal_double(rng, 0, 0.01)});
    REQUIRE(at_best <= alignment_objective(src, dst, corr, perturbed) + 1e-12);
  }
}

TEST_CASE("degenerate correspondence counts are rejected", "[horn]") {
  Rng rng = make_rng(36);
  const PointCloud c = random_cloud(rng, 10);
  CorrespondenceSet two = identity_pairs(2);
  REQUIRE_THROWS_MATCHES(weighted_horn(c, c, two), Error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("degenerate correspondences")));

  CorrespondenceSet zeroed = identity_pairs(c.size(), 0.0);
  REQUIRE_THROWS_AS(weighted_horn(c, c, zeroed), Error);
}

TEST_CASE("collinear weighted sources are rank-deficient", "[horn]") {
  PointCloud src;
  for (int i = 0; i < 10; ++i) src.points.emplace_back(i * 0.3, 0.0, 0.0);
  const PointCloud dst = src;
  REQUIRE_THROWS_MATCHES(weighted_horn(src, dst, identity_pairs(src.size())), Error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("rank-deficient")));

  // Full-rank points whose weights zero out everything off one line.
  Rng rng = make_rng(37);
  PointCloud src2 = random_cloud(rng, 20);
  for (int i = 0; i < 5; ++i) src2.points[static_cast<std::size_t>(i)] = {0.1 * i, 0.0, 0.0};
  CorrespondenceSet corr = identity_pairs(src2.size(), 0.0);
  for (int i = 0; i < 5; ++i) corr[static_cast<std::size_t>(i)].weight = 1.0;
  REQUIRE_THROWS_AS(weighted_horn(src2, src2, corr), Error);
}

TEST_CASE("coincident targets fall back to centroid alignment", "[horn]") {
  Rng rng = make_rng(38);
  const PointCloud src = random_cloud(rng, 30, 1.0);
  PointCloud dst = src;
  for (auto& p : dst.points) p = Eigen::Vector3d(2.0, -1.0, 0.5);
  const RigidTransform t = weighted_horn(src, dst, identity_pairs(src.size()));
  REQUIRE((t.rotation() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() == 0.0);
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : src.points) centroid += p;
  centroid /= static_cast<double>(src.size());
  REQUIRE((t.translation() - (Eigen::Vector3d(2.0, -1.0, 0.5) - centroid)).norm() < 1e-12);
}
