#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "overlap_reg/horn.hpp"
#include "overlap_reg/omega.hpp"
#include "overlap_reg/parallel.hpp"
#include "overlap_reg/point_cloud.hpp"
#include "overlap_reg/registration_result.hpp"
#include "overlap_reg/rng.hpp"
#include "overlap_reg/transform.hpp"

namespace overlap_reg {

// Gaussian mixture spatial model with an optional uniform outlier component.
// The outlier component is uniform over the fitted cloud's bounding box;
// outlier_density caches its 1/volume.
struct GaussianMixture {
  std::vector<double> weights;               // pi_k, sum + outlier_weight == 1
  std::vector<Eigen::Vector3d> means;        // m
  std::vector<Eigen::Matrix3d> covariances;  // m^2, SPD
  double outlier_weight = 0.0;               // pi_0 in [0, 1)
  double outlier_density = 0.0;              // 1/m^3

  std::size_t component_count() const { return weights.size(); }
};

inline void validate(const GaussianMixture& m) {
  if (m.means.size() != m.weights.size() || m.covariances.size() != m.weights.size()) {
    fail(ErrorCode::invalid_argument, "mixture: component array lengths differ");
  }
  if (m.weights.empty()) fail(ErrorCode::invalid_argument, "mixture: no components");
  if (!(m.outlier_weight >= 0.0 && m.outlier_weight < 1.0)) {
    fail(ErrorCode::invalid_argument, "mixture: outlier weight outside [0, 1)");
  }
  double sum = m.outlier_weight;
  for (double w : m.weights) {
    if (!(w >= 0.0)) fail(ErrorCode::invalid_argument, "mixture: negative component weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    fail(ErrorCode::invalid_argument, "mixture: weights sum to " + std::to_string(sum));
  }
  if (m.outlier_weight > 0.0 && !(m.outlier_density > 0.0)) {
    fail(ErrorCode::invalid_argument, "mixture: outlier component without density");
  }
  for (const Eigen::Matrix3d& cov : m.covariances) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    if (!(eig.eigenvalues()(0) > 0.0)) {
      fail(ErrorCode::invalid_argument, "mixture: covariance not positive definite");
    }
  }
}

// Posterior component memberships. Column K (the last) is the outlier
// component; every row sums to 1.
struct Responsibilities {
  Eigen::MatrixXd posterior;  // N x (K+1)

  std::size_t point_count() const { return static_cast<std::size_t>(posterior.rows()); }
  std::size_t component_count() const { return static_cast<std::size_t>(posterior.cols()) - 1; }
};

struct GmmFitParams {
  double outlier_weight = 0.05;  // initial pi_0; updated by EM
  int max_iterations = 100;
  double rel_tolerance = 1e-6;
  double variance_floor = 1e-6;  // m^2, minimum covariance eigenvalue
};

// Heuristic component count used when a caller does not pin K.
inline std::size_t default_component_count(std::size_t n) {
  const std::size_t k = (n + 99) / 100;
  return std::clamp<std::size_t>(k, 8, 256);
}

namespace detail {

// Clamps covariance eigenvalues to the floor. Returns the input untouched
// when no eigenvalue is below it.
inline Eigen::Matrix3d spd_floor(const Eigen::Matrix3d& cov, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  if (eig.eigenvalues()(0) >= floor) return cov;
  Eigen::Vector3d ev = eig.eigenvalues().cwiseMax(floor);
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

struct ComponentCache {
  Eigen::Matrix3d inv;
  double log_norm = 0.0;  // log pi_k - 0.5 * (3 log 2pi + logdet)
  bool active = false;
};

inline std::vector<ComponentCache> cache_components(const GaussianMixture& m) {
  std::vector<ComponentCache> cache(m.component_count());
  for (std::size_t k = 0; k < m.component_count(); ++k) {
    if (m.weights[k] <= 0.0) continue;
    Eigen::LLT<Eigen::Matrix3d> llt(m.covariances[k]);
    if (llt.info() != Eigen::Success) {
      fail(ErrorCode::invalid_argument, "mixture: covariance Cholesky failed");
    }
    const Eigen::Matrix3d l = llt.matrixL();
    const double logdet = 2.0 * l.diagonal().array().log().sum();
    cache[k].inv = llt.solve(Eigen::Matrix3d::Identity());
    cache[k].log_norm =
        std::log(m.weights[k]) - 0.5 * (3.0 * std::log(2.0 * kPi) + logdet);
    cache[k].active = true;
  }
  return cache;
}

inline double bounding_box_volume(const PointCloud& c) {
  Eigen::Vector3d lo = c.points.front();
  Eigen::Vector3d hi = lo;
  for (const auto& p : c.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Eigen::Vector3d extent = (hi - lo).cwiseMax(1e-3);
  return extent.prod();
}

}  // namespace detail

// E-step: posterior memberships of each point under the mixture, plus the
// observed-data log-likelihood. Log-domain throughout.
inline std::pair<Responsibilities, double> compute_responsibilities(
    const GaussianMixture& m, const std::vector<Eigen::Vector3d>& points) {
  const std::size_t n = points.size();
  const std::size_t kk = m.component_count();
  const auto cache = detail::cache_components(m);
  const double log_outlier = m.outlier_weight > 0.0
                                 ? std::log(m.outlier_weight) + std::log(m.outlier_density)
                                 : -std::numeric_limits<double>::infinity();

  Responsibilities resp;
  resp.posterior.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kk + 1));
  std::vector<double> point_ll(n, 0.0);

  parallel_for(n, [&](std::size_t i) {
    thread_local std::vector<double> lt;
    lt.assign(kk + 1, -std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < kk; ++k) {
      if (!cache[k].active) continue;
      const Eigen::Vector3d d = points[i] - m.means[k];
      lt[k] = cache[k].log_norm - 0.5 * d.dot(cache[k].inv * d);
    }
    lt[kk] = log_outlier;
    double max_lt = -std::numeric_limits<double>::infinity();
    for (double v : lt) max_lt = std::max(max_lt, v);
    double sum = 0.0;
    for (double v : lt) sum += std::exp(v - max_lt);
    const double lse = max_lt + std::log(sum);
    for (std::size_t k = 0; k <= kk; ++k) {
      resp.posterior(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          std::exp(lt[k] - lse);
    }
    point_ll[i] = lse;
  });

  const double ll = parallel_reduce(
      n, 0.0,
      [&](std::size_t begin, std::size_t end) {
        double acc = 0.0;
        for (std::size_t i = begin; i < end; ++i) acc += point_ll[i];
        return acc;
      },
      [](double a, double b) { return a + b; });
  return {std::move(resp), ll};
}

struct GmmFitReport {
  GaussianMixture model;
  std::vector<double> log_likelihood;  // one entry per EM iteration
  int iterations = 0;
};

// Maximum-likelihood mixture fit by EM with k-means++ style seeding from the
// given RNG seed. The log-likelihood trace is non-decreasing; iteration stops
// on relative improvement below rel_tolerance or at max_iterations.
inline GmmFitReport fit_gmm_report(const PointCloud& cloud, std::size_t components,
                                   std::uint64_t seed, const GmmFitParams& params = {}) {
  const std::size_t n = cloud.size();
  if (components < 1) fail(ErrorCode::invalid_argument, "fit_gmm: need at least one component");
  if (n < components) {
    fail(ErrorCode::invalid_argument,
         "fit_gmm: " + std::to_string(n) + " points cannot support " +
             std::to_string(components) + " components");
  }
  if (!(params.outlier_weight >= 0.0 && params.outlier_weight < 1.0)) {
    fail(ErrorCode::invalid_argument, "fit_gmm: outlier weight outside [0, 1)");
  }

  // k-means++ seeding.
  Rng rng = make_rng(seed);
  std::vector<Eigen::Vector3d> centers;
  centers.reserve(components);
  centers.push_back(cloud.points[uniform_index(rng, n)]);
  std::vector<double> dist_sq(n);
  for (std::size_t i = 0; i < n; ++i) dist_sq[i] = (cloud.points[i] - centers[0]).squaredNorm();
  while (centers.size() < components) {
    double total = 0.0;
    for (double d : dist_sq) total += d;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double r = uniform_double(rng) * total;
      double run = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        run += dist_sq[i];
        if (run >= r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = uniform_index(rng, n);
    }
    centers.push_back(cloud.points[pick]);
    for (std::size_t i = 0; i < n; ++i) {
      dist_sq[i] = std::min(dist_sq[i], (cloud.points[i] - centers.back()).squaredNorm());
    }
  }

  double mean_sq = 0.0;
  for (double d : dist_sq) mean_sq += d;
  mean_sq /= static_cast<double>(n);
  const double init_var = std::max(mean_sq, params.variance_floor);

  GmmFitReport report;
  GaussianMixture& model = report.model;
  model.weights.assign(components, (1.0 - params.outlier_weight) / static_cast<double>(components));
  model.means = std::move(centers);
  model.covariances.assign(components, init_var * Eigen::Matrix3d::Identity());
  model.outlier_weight = params.outlier_weight;
  model.outlier_density = 1.0 / detail::bounding_box_volume(cloud);

  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < params.max_iterations; ++iter) {
    auto [resp, ll] = compute_responsibilities(model, cloud.points);
    report.log_likelihood.push_back(ll);
    report.iterations = iter + 1;

    // M-step.
    const Eigen::Index kk = static_cast<Eigen::Index>(components);
    for (Eigen::Index k = 0; k < kk; ++k) {
      const double nk = resp.posterior.col(k).sum();
      if (nk <= 1e-12) {
        model.weights[static_cast<std::size_t>(k)] = 0.0;  // dead component
        continue;
      }
      Eigen::Vector3d mu = Eigen::Vector3d::Zero();
      for (std::size_t i = 0; i < n; ++i) {
        mu += resp.posterior(static_cast<Eigen::Index>(i), k) * cloud.points[i];
      }
      mu /= nk;
      Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
      for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d d = cloud.points[i] - mu;
        cov += resp.posterior(static_cast<Eigen::Index>(i), k) * (d * d.transpose());
      }
      cov /= nk;
      model.weights[static_cast<std::size_t>(k)] = nk / static_cast<double>(n);
      model.means[static_cast<std::size_t>(k)] = mu;
      model.covariances[static_cast<std::size_t>(k)] =
          detail::spd_floor(cov, params.variance_floor);
    }
    model.outlier_weight = resp.posterior.col(kk).sum() / static_cast<double>(n);

    if (std::isfinite(prev_ll)) {
      const double improvement = ll - prev_ll;
      if (improvement < params.rel_tolerance * std::abs(prev_ll)) break;
    }
    prev_ll = ll;
  }
  return report;
}

inline GaussianMixture fit_gmm(const PointCloud& cloud, std::size_t components,
                               std::uint64_t seed, const GmmFitParams& params = {}) {
  return fit_gmm_report(cloud, components, seed, params).model;
}

struct GmmRegParams {
  int max_iterations = 50;
  double convergence_rot_deg = 0.01;
  double convergence_trans = 1e-4;  // m
};

inline void validate(const GmmRegParams& p) {
  if (p.max_iterations < 1) fail(ErrorCode::invalid_argument, "gmm: max_iterations must be >= 1");
  if (!(p.convergence_rot_deg > 0.0) || !(p.convergence_trans > 0.0)) {
    fail(ErrorCode::invalid_argument, "gmm: convergence thresholds must be positive");
  }
}

// EM registration of a moving cloud against a fitted mixture. The E-step
// takes posteriors of the transformed points under the model; the M-step
// isotropicizes each covariance (scalar trace/3) so the rigid update reduces
// to a weighted point-to-point alignment against per-point virtual targets
//   m_i = sum_k a_ik mu_k / sum_k a_ik,   a_ik = r_ik / sigma_k^2,
// with pair weight ext_i * sum_k a_ik - algebraically the same optimum as
// the full sum over components. External overlap weights scale the points'
// contributions.
inline RegistrationResult register_gmm(const GaussianMixture& model, const PointCloud& moving,
                                       const OverlapWeights* ext_weights,
                                       const RigidTransform& init = RigidTransform(),
                                       const GmmRegParams& params = {}) {
  validate(model);
  validate(params);
  if (moving.size() < 3) {
    fail(ErrorCode::invalid_argument, "register_gmm: moving cloud must have >= 3 points");
  }
  if (ext_weights != nullptr && ext_weights->weights.size() != moving.size()) {
    fail(ErrorCode::invalid_argument, "register_gmm: weight count != moving point count");
  }

  const std::size_t n = moving.size();
  const std::size_t kk = model.component_count();
  std::vector<double> inv_sigma_sq(kk, 0.0);
  for (std::size_t k = 0; k < kk; ++k) {
    inv_sigma_sq[k] = 3.0 / model.covariances[k].trace();
  }

  RegistrationResult result;
  result.trace.reserve(static_cast<std::size_t>(params.max_iterations));
  RigidTransform current = init;
  std::vector<Eigen::Vector3d> transformed(n);
  PointCloud virtual_targets;
  virtual_targets.points.assign(n, Eigen::Vector3d::Zero());

  for (int iter = 0; iter < params.max_iterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i) transformed[i] = current.apply(moving.points[i]);
    auto [resp, ll] = compute_responsibilities(model, transformed);

    CorrespondenceSet pairs;
    pairs.reserve(n);
    double max_weight = 0.0;
    std::vector<double> point_weight(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Vector3d numerator = Eigen::Vector3d::Zero();
      double denom = 0.0;
      for (std::size_t k = 0; k < kk; ++k) {
        const double a =
            resp.posterior(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) *
            inv_sigma_sq[k];
        if (a <= 0.0) continue;
        numerator += a * model.means[k];
        denom += a;
      }
      if (denom <= 0.0) continue;
      virtual_targets.points[i] = numerator / denom;
      const double ext = ext_weights != nullptr ? ext_weights->weights[i] : 1.0;
      point_weight[i] = ext * denom;
      max_weight = std::max(max_weight, point_weight[i]);
    }
    if (max_weight <= 0.0) fail(ErrorCode::no_model_support, "no model support");

    double objective_weight_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (point_weight[i] <= 0.0) continue;
      pairs.push_back({i, i, point_weight[i] / max_weight, 0.0});
    }
    if (pairs.size() < 3) fail(ErrorCode::no_model_support, "no model support");

    const RigidTransform next = weighted_horn(moving, virtual_targets, pairs);

    // Trace objective: negative log-likelihood of the points at match time;
    // rmsd measured against the virtual targets.
    double rms = 0.0;
    for (const Correspondence& p : pairs) {
      const double r2 =
          (next.apply(moving.points[p.source_index]) - virtual_targets.points[p.target_index])
              .squaredNorm();
      rms += p.weight * r2;
      objective_weight_sum += p.weight;
    }
    result.trace.push_back({next, -ll, pairs.size()});
    result.iterations = iter + 1;
    result.final_rmsd =
        objective_weight_sum > 0.0 ? std::sqrt(rms / objective_weight_sum) : 0.0;

    const PoseError delta = transform_delta(current, next);
    current = next;
    if (delta.within(params.convergence_rot_deg, params.convergence_trans)) {
      result.converged = true;
      break;
    }
  }

  result.transform = current;
  return result;
}

// Component-level realization of the overlap restriction on the model: each
// mixture weight is multiplied by the Algorithm-2 weight of its mean seen
// from the other sensor (whose pose is given in the model's frame), then the
// whole weight vector, outlier included, is renormalized onto the simplex.
// If nothing is penalized the model is returned bit-identical.
inline GaussianMixture reweight_model(const GaussianMixture& m, const SensorFov& fov,
                                      const RigidTransform& pose, const PenaltyConstants& k,
                                      VerticalBoundMode mode = VerticalBoundMode::verbatim) {
  validate(m);
  validate(fov);
  validate(k);
  const Eigen::Matrix3d rot_t = pose.rotation().transpose();
  const Eigen::Vector3d t = pose.translation();

  std::vector<double> factor(m.component_count(), 1.0);
  bool any_penalty = false;
  for (std::size_t c = 0; c < m.component_count(); ++c) {
    const double xi = fov_penalty(rot_t * (m.means[c] - t), fov, k, mode);
    if (xi > 0.0) {
      factor[c] = penalty_to_weight(xi, k);
      any_penalty = true;
    }
  }
  if (!any_penalty) return m;

  GaussianMixture out = m;
  double component_mass = 0.0;
  for (std::size_t c = 0; c < m.component_count(); ++c) {
    out.weights[c] = m.weights[c] * factor[c];
    component_mass += out.weights[c];
  }
  if (component_mass <= 0.0) {
    fail(ErrorCode::model_outside_overlap, "model fully outside overlap");
  }
  const double total = component_mass + out.outlier_weight;
  for (double& w : out.weights) w /= total;
  out.outlier_weight /= total;
  return out;
}

}  // namespace overlap_reg
