#include <catch_amalgamated.hpp>

#include "overlap_reg/gmm.hpp"
#include "test_util.hpp"

using namespace overlap_reg;
using namespace overlap_reg::testing;

namespace {

PointCloud gaussian_blob(Rng& rng, const Eigen::Vector3d& center, double sigma, std::size_t n) {
  PointCloud c;
  c.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.points.push_back(center + Eigen::Vector3d(normal_double(rng, 0, sigma),
                                                normal_double(rng, 0, sigma),
                                                normal_double(rng, 0, sigma)));
  }
  return c;
}

GaussianMixture toy_model(std::size_t k, Rng& rng, double sigma = 0.05, double spread = 1.0) {
  GaussianMixture m;
  m.weights.assign(k, 1.0 / static_cast<double>(k));
  for (std::size_t i = 0; i < k; ++i) {
    m.means.push_back(spread * random_unit(rng) * uniform_double(rng, 0.5, 1.0));
    m.covariances.push_back(sigma * sigma * Eigen::Matrix3d::Identity());
  }
  m.outlier_weight = 0.0;
  m.outlier_density = 1.0;
  return m;
}

}  // namespace

TEST_CASE("single-component fit matches the closed form", "[gmm]") {
  Rng rng = make_rng(71);
  const PointCloud cloud = gaussian_blob(rng, {0.4, -0.2, 1.0}, 0.3, 500);
  GmmFitParams params;
  params.outlier_weight = 0.0;  // pure Gaussian: closed form is exact
  const GaussianMixture model = fit_gmm(cloud, 1, 9, params);

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : cloud.points) centroid += p;
  centroid /= static_cast<double>(cloud.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : cloud.points) {
    const Eigen::Vector3d d = p - centroid;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(cloud.size());

  REQUIRE((model.means[0] - centroid).cwiseAbs().maxCoeff() < 1e-9);
  REQUIRE((model.covariances[0] - cov).cwiseAbs().maxCoeff() < 1e-9);
  REQUIRE(model.weights[0] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("two separated blobs are found by a two-component fit", "[gmm]") {
  Rng rng = make_rng(72);
  const Eigen::Vector3d c1(-1.5, 0.0, 0.0);
  const Eigen::Vector3d c2(1.5, 0.5, -0.3);
  PointCloud cloud = gaussian_blob(rng, c1, 0.1, 1000);
  const PointCloud other = gaussian_blob(rng, c2, 0.1, 1000);
  cloud.points.insert(cloud.points.end(), other.points.begin(), other.points.end());

  const GaussianMixture model = fit_gmm(cloud, 2, 4);
  const double d11 = (model.means[0] - c1).norm();
  const double d12 = (model.means[0] - c2).norm();
  if (d11 < d12) {
    REQUIRE(d11 < 0.05);
    REQUIRE((model.means[1] - c2).norm() < 0.05);
  } else {
    REQUIRE(d12 < 0.05);
    REQUIRE((model.means[1] - c1).norm() < 0.05);
  }
}

TEST_CASE("EM log-likelihood is non-decreasing", "[gmm]") {
  Rng rng = make_rng(73);
  for (int dataset = 0; dataset < 20; ++dataset) {
    PointCloud cloud;
    const int blobs = 2 + static_cast<int>(uniform_index(rng, 4));
    for (int b = 0; b < blobs; ++b) {
      const PointCloud blob = gaussian_blob(
          rng, {uniform_double(rng, -2, 2), uniform_double(rng, -2, 2), uniform_double(rng, -2, 2)},
          uniform_double(rng, 0.05, 0.3), 150);
      cloud.points.insert(cloud.points.end(), blob.points.begin(), blob.points.end());
    }
    const GmmFitReport report =
        fit_gmm_report(cloud, 4, static_cast<std::uint64_t>(dataset) * 31 + 7);
    REQUIRE(report.log_likelihood.size() >= 2);
    for (std::size_t i = 1; i < report.log_likelihood.size(); ++i) {
      REQUIRE(report.log_likelihood[i] >= report.log_likelihood[i - 1]);
    }
  }
}

TEST_CASE("responsibilities rows sum to one", "[gmm]") {
  Rng rng = make_rng(74);
  const GaussianMixture model = toy_model(5, rng);
  const PointCloud cloud = random_cloud(rng, 500, 2.0);
  const auto [resp, ll] = compute_responsibilities(model, cloud.points);
  REQUIRE(std::isfinite(ll));
  for (Eigen::Index i = 0; i < resp.posterior.rows(); ++i) {
    REQUIRE(resp.posterior.row(i).sum() == Catch::Approx(1.0).margin(1e-9));
    for (Eigen::Index k = 0; k < resp.posterior.cols(); ++k) {
      REQUIRE(resp.posterior(i, k) >= 0.0);
      REQUIRE(resp.posterior(i, k) <= 1.0);
    }
  }
}

TEST_CASE("fit rejects more components than points", "[gmm]") {
  Rng rng = make_rng(75);
  const PointCloud cloud = random_cloud(rng, 5, 1.0);
  REQUIRE_THROWS_AS(fit_gmm(cloud, 6, 1), Error);
}

TEST_CASE("component count heuristic clamps", "[gmm]") {
  REQUIRE(default_component_count(50) == 8);
  REQUIRE(default_component_count(5000) == 50);
  REQUIRE(default_component_count(1000000) == 256);
}

TEST_CASE("registration of model samples stays at identity", "[gmm]") {
  Rng rng = make_rng(76);
  const GaussianMixture model = toy_model(4, rng, 0.03, 1.2);
  const PointCloud moving = sample_mixture(model, 3000, rng);
  const RegistrationResult r = register_gmm(model, moving, nullptr);
  REQUIRE(r.converged);
  const PoseError err = transform_delta(r.transform, RigidTransform::identity());
  REQUIRE(err.rotation_deg < 0.1);
  REQUIRE(err.translation_m < 1e-3);
}

TEST_CASE("all-ones external weights match no weights bitwise", "[gmm]") {
  Rng rng = make_rng(77);
  const GaussianMixture model = toy_model(3, rng, 0.05, 1.0);
  const PointCloud moving = sample_mixture(model, 800, rng);
  OverlapWeights ones;
  ones.weights.assign(moving.size(), 1.0);
  ones.penalties.assign(moving.size(), 0.0);

  const RegistrationResult bare = register_gmm(model, moving, nullptr);
  const RegistrationResult weighted = register_gmm(model, moving, &ones);
  REQUIRE(bare.iterations == weighted.iterations);
  REQUIRE(bare.transform == weighted.transform);
}

TEST_CASE("single component degenerates to exact centroid alignment", "[gmm]") {
  Rng rng = make_rng(78);
  const PointCloud base = gaussian_blob(rng, {0.2, 0.1, -0.4}, 0.2, 400);
  GmmFitParams params;
  params.outlier_weight = 0.0;
  const GaussianMixture model = fit_gmm(base, 1, 3, params);

  const Eigen::Vector3d offset(0.7, -0.3, 0.25);
  PointCloud moving = base;
  for (auto& p : moving.points) p += offset;

  const RegistrationResult r = register_gmm(model, moving, nullptr);
  REQUIRE((r.transform.rotation() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((r.transform.translation() + offset).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("points absorbed by the outlier component mean no model support", "[gmm]") {
  Rng rng = make_rng(79);
  GaussianMixture model = toy_model(2, rng, 0.01, 0.5);
  model.weights = {0.45, 0.45};
  model.outlier_weight = 0.1;
  model.outlier_density = 1.0;
  // Moving points live 1e6 sigma away: component likelihoods underflow and
  // the outlier soaks up everything.
  PointCloud far;
  for (int i = 0; i < 10; ++i) {
    far.points.emplace_back(1e4 + i * 0.1, 1e4, 1e4);
  }
  REQUIRE_THROWS_MATCHES(register_gmm(model, far, nullptr), Error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("no model support")));
}

TEST_CASE("reweight with an all-enclosing frustum returns the model bit-identical", "[gmm]") {
  Rng rng = make_rng(80);
  GaussianMixture model = toy_model(6, rng);
  model.weights = {0.1, 0.2, 0.15, 0.25, 0.2, 0.1};
  const GaussianMixture out = reweight_model(model, SensorFov::full_sphere(),
                                             RigidTransform::identity(), PenaltyConstants{});
  REQUIRE(out.weights == model.weights);
  REQUIRE(out.outlier_weight == model.outlier_weight);
  for (std::size_t k = 0; k < model.component_count(); ++k) {
    REQUIRE(out.means[k] == model.means[k]);
  }
}

TEST_CASE("reweight renormalizes a range-violating component as derived by hand", "[gmm]") {
  GaussianMixture model;
  model.weights = {0.5, 0.5};
  model.means = {Eigen::Vector3d(1.0, 0.0, 0.0), Eigen::Vector3d(30.0, 0.0, 0.0)};
  model.covariances = {0.01 * Eigen::Matrix3d::Identity(), 0.01 * Eigen::Matrix3d::Identity()};
  model.outlier_weight = 0.0;
  model.outlier_density = 1.0;

  SensorFov fov;
  fov.psi_min = 0.0;
  fov.psi_max = 10.0;  // second mean violates the range bound
  fov.psi_x = kTwoPi;
  fov.psi_y = kPi;
  PenaltyConstants k;
  k.k0 = 1.0;
  k.k1 = 1.0;
  k.k2 = 5.0;
  const double w = std::exp(-5.0);  // hand evaluation of the penalty weight

  const GaussianMixture out =
      reweight_model(model, fov, RigidTransform::identity(), k);
  REQUIRE(out.weights[0] == Catch::Approx(1.0 / (1.0 + w)).margin(1e-12));
  REQUIRE(out.weights[1] == Catch::Approx(w / (1.0 + w)).margin(1e-12));
}

TEST_CASE("reweight preserves the weight simplex on random models", "[gmm]") {
  Rng rng = make_rng(81);
  for (int trial = 0; trial < 50; ++trial) {
    GaussianMixture model = toy_model(1 + uniform_index(rng, 8), rng, 0.05, 3.0);
    // Random simplex weights with an outlier share.
    double total = 0.0;
    std::vector<double> raw(model.component_count());
    for (double& v : raw) {
      v = uniform_double(rng, 0.05, 1.0);
      total += v;
    }
    model.outlier_weight = uniform_double(rng, 0.0, 0.3);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      model.weights[i] = raw[i] / total * (1.0 - model.outlier_weight);
    }
    model.outlier_density = 1.0;

    SensorFov fov;
    fov.psi_min = 0.0;
    fov.psi_max = uniform_double(rng, 1.0, 4.0);
    fov.psi_x = uniform_double(rng, 0.5, kTwoPi);
    fov.psi_y = uniform_double(rng, 0.5, kPi);
    const RigidTransform pose = random_transform(rng, kPi, 1.0);

    try {
      const GaussianMixture out = reweight_model(model, fov, pose, PenaltyConstants{});
      double sum = out.outlier_weight;
      for (double v : out.weights) sum += v;
      REQUIRE(sum == Catch::Approx(1.0).margin(1e-9));
    } catch (const Error& e) {
      REQUIRE(e.code() == ErrorCode::model_outside_overlap);
    }
  }
}

TEST_CASE("a model driven fully outside the overlap fails loudly", "[gmm]") {
  GaussianMixture model;
  model.weights = {1.0};
  model.means = {Eigen::Vector3d(100.0, 0.0, 0.0)};
  model.covariances = {Eigen::Matrix3d::Identity()};
  model.outlier_weight = 0.0;
  model.outlier_density = 1.0;
  SensorFov fov;
  fov.psi_min = 0.0;
  fov.psi_max = 1.0;
  fov.psi_x = kTwoPi;
  fov.psi_y = kPi;
  PenaltyConstants k;
  k.k0 = 1000.0;  // exp(-k2*k0) underflows to exactly zero
  k.k2 = 5.0;
  REQUIRE_THROWS_MATCHES(reweight_model(model, fov, RigidTransform::identity(), k), Error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("model fully outside overlap")));
}
