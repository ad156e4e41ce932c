#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "overlap_reg/correspondence.hpp"
#include "overlap_reg/horn.hpp"
#include "overlap_reg/kdtree.hpp"
#include "overlap_reg/omega.hpp"
#include "overlap_reg/parallel.hpp"
#include "overlap_reg/point_cloud.hpp"
#include "overlap_reg/registration_result.hpp"
#include "overlap_reg/transform.hpp"

namespace overlap_reg {

// External overlap weights below this are treated as "outside": the point is
// skipped during matching instead of merely downweighted.
inline constexpr double kWeightGate = 1e-3;

enum class RobustKernel { welsch, cauchy, huber };

// Robust kernel influence at residual r. All kernels are 1 at r = 0.
inline double kernel_influence(RobustKernel kernel, double r, double scale) {
  const double u = r / scale;
  switch (kernel) {
    case RobustKernel::welsch: return std::exp(-u * u);
    case RobustKernel::cauchy: return 1.0 / (1.0 + u * u);
    case RobustKernel::huber: return r <= scale ? 1.0 : scale / r;
  }
  return 1.0;
}

// Matching policy applied to the raw nearest-neighbor pairs each iteration.
struct IcpVariant {
  enum class Kind { plain, trimmed, fractional, irls };

  Kind kind = Kind::plain;
  double keep_fraction = 0.85;              // trimmed
  double lambda = 3.0;                      // fractional
  RobustKernel kernel = RobustKernel::welsch;  // irls
  std::optional<double> scale;              // irls; empty = 3x median initial residual

  static IcpVariant plain() { return {}; }
  static IcpVariant trimmed(double keep) {
    IcpVariant v;
    v.kind = Kind::trimmed;
    v.keep_fraction = keep;
    return v;
  }
  static IcpVariant fractional(double lambda) {
    IcpVariant v;
    v.kind = Kind::fractional;
    v.lambda = lambda;
    return v;
  }
  static IcpVariant irls(RobustKernel kernel, std::optional<double> scale = std::nullopt) {
    IcpVariant v;
    v.kind = Kind::irls;
    v.kernel = kernel;
    v.scale = scale;
    return v;
  }
};

struct IcpParams {
  int max_iterations = 50;
  double convergence_rot_deg = 0.01;
  double convergence_trans = 1e-4;  // m
  double max_match_distance = std::numeric_limits<double>::infinity();  // m
  IcpVariant variant;
};

inline void validate(const IcpParams& p) {
  if (p.max_iterations < 1) fail(ErrorCode::invalid_argument, "icp: max_iterations must be >= 1");
  if (!(p.convergence_rot_deg > 0.0) || !(p.convergence_trans > 0.0)) {
    fail(ErrorCode::invalid_argument, "icp: convergence thresholds must be positive");
  }
  if (!(p.max_match_distance > 0.0)) {
    fail(ErrorCode::invalid_argument, "icp: max_match_distance must be positive");
  }
  switch (p.variant.kind) {
    case IcpVariant::Kind::trimmed:
      if (!(p.variant.keep_fraction > 0.0 && p.variant.keep_fraction <= 1.0)) {
        fail(ErrorCode::invalid_argument, "icp: keep_fraction outside (0, 1]");
      }
      break;
    case IcpVariant::Kind::fractional:
      if (!(p.variant.lambda >= 0.0)) fail(ErrorCode::invalid_argument, "icp: lambda must be >= 0");
      break;
    case IcpVariant::Kind::irls:
      if (p.variant.scale && !(*p.variant.scale > 0.0)) {
        fail(ErrorCode::invalid_argument, "icp: kernel scale must be positive");
      }
      break;
    case IcpVariant::Kind::plain: break;
  }
}

// Keeps the ceil(f * N) pairs with the smallest squared distance; boundary
// ties go to the lower source index. Input order is preserved, so f = 1
// returns the set unchanged.
inline CorrespondenceSet trim_pairs(const CorrespondenceSet& corr, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    fail(ErrorCode::invalid_argument, "trim_pairs: keep_fraction outside (0, 1]");
  }
  if (corr.empty()) return {};
  const std::size_t n = corr.size();
  const std::size_t keep = static_cast<std::size_t>(
      std::ceil(keep_fraction * static_cast<double>(n)));
  if (keep >= n) return corr;

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::nth_element(order.begin(), order.begin() + keep, order.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (corr[a].squared_distance != corr[b].squared_distance) {
                       return corr[a].squared_distance < corr[b].squared_distance;
                     }
                     return corr[a].source_index < corr[b].source_index;
                   });
  std::vector<char> keep_flag(n, 0);
  for (std::size_t i = 0; i < keep; ++i) keep_flag[order[i]] = 1;
  CorrespondenceSet out;
  out.reserve(keep);
  for (std::size_t i = 0; i < n; ++i) {
    if (keep_flag[i]) out.push_back(corr[i]);
  }
  return out;
}

// Fractional match selection: evaluates FRMSD(f) = RMSD(f-closest fraction)
// / f^lambda at every cut point f = k/N, k = 3..N, and keeps the minimizing
// prefix. Exact ties prefer the larger fraction. Returns the retained pairs
// (input order preserved) and the chosen f.
inline std::pair<CorrespondenceSet, double> ficp_select(const CorrespondenceSet& corr,
                                                        double lambda) {
  if (corr.size() < 3) {
    fail(ErrorCode::degenerate_correspondences, "ficp_select: fewer than 3 pairs");
  }
  if (!(lambda >= 0.0)) fail(ErrorCode::invalid_argument, "ficp_select: lambda must be >= 0");

  const std::size_t n = corr.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (corr[a].squared_distance != corr[b].squared_distance) {
      return corr[a].squared_distance < corr[b].squared_distance;
    }
    return corr[a].source_index < corr[b].source_index;
  });

  double prefix = 0.0;
  for (std::size_t k = 0; k < 3; ++k) prefix += corr[order[k]].squared_distance;
  std::size_t best_k = 3;
  double best_frmsd = std::numeric_limits<double>::infinity();
  for (std::size_t k = 3; k <= n; ++k) {
    if (k > 3) prefix += corr[order[k - 1]].squared_distance;
    const double f = static_cast<double>(k) / static_cast<double>(n);
    const double rmsd = std::sqrt(prefix / static_cast<double>(k));
    const double frmsd = rmsd / std::pow(f, lambda);
    if (frmsd <= best_frmsd) {
      best_frmsd = frmsd;
      best_k = k;
    }
  }

  std::vector<char> keep_flag(n, 0);
  for (std::size_t i = 0; i < best_k; ++i) keep_flag[order[i]] = 1;
  CorrespondenceSet out;
  out.reserve(best_k);
  for (std::size_t i = 0; i < n; ++i) {
    if (keep_flag[i]) out.push_back(corr[i]);
  }
  return {std::move(out), static_cast<double>(best_k) / static_cast<double>(n)};
}

// Multiplies each pair weight by the robust kernel influence at its residual.
inline CorrespondenceSet irls_weights(const CorrespondenceSet& corr, RobustKernel kernel,
                                      double scale) {
  if (!(scale > 0.0)) fail(ErrorCode::invalid_argument, "irls_weights: scale must be positive");
  CorrespondenceSet out = corr;
  for (Correspondence& p : out) {
    p.weight *= kernel_influence(kernel, std::sqrt(p.squared_distance), scale);
  }
  return out;
}

namespace detail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  return v[mid];
}

}  // namespace detail

// ICP-family registration of source onto target: alternates nearest-neighbor
// matching (source -> target) with the weighted closed-form alignment, under
// the variant's matching policy. External per-source-point overlap weights,
// when given, multiply the pair weights; weights under kWeightGate exclude
// the point from matching entirely.
inline RegistrationResult register_icp(const PointCloud& source, const PointCloud& target,
                                       const IcpParams& params,
                                       const OverlapWeights* ext_weights,
                                       const RigidTransform& init = RigidTransform()) {
  validate(params);
  if (source.size() < 3 || target.size() < 3) {
    fail(ErrorCode::invalid_argument, "register_icp: clouds must have >= 3 points");
  }
  if (ext_weights != nullptr && ext_weights->weights.size() != source.size()) {
    fail(ErrorCode::invalid_argument, "register_icp: weight count != source point count");
  }

  std::vector<std::size_t> active;
  active.reserve(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (ext_weights == nullptr || ext_weights->weights[i] >= kWeightGate) active.push_back(i);
  }
  if (active.empty()) fail(ErrorCode::no_overlap_support, "no overlap support");

  const NnIndex index(target);
  const bool bounded = std::isfinite(params.max_match_distance);
  const double max_dist_sq = params.max_match_distance * params.max_match_distance;

  RegistrationResult result;
  result.trace.reserve(static_cast<std::size_t>(params.max_iterations));
  RigidTransform current = init;
  std::optional<double> irls_scale = params.variant.scale;
  std::vector<NnIndex::Result> matches(active.size());

  for (int iter = 0; iter < params.max_iterations; ++iter) {
    parallel_for(active.size(), [&](std::size_t a) {
      matches[a] = index.nearest(current.apply(source.points[active[a]]));
    });

    CorrespondenceSet raw;
    raw.reserve(active.size());
    for (std::size_t a = 0; a < active.size(); ++a) {
      const double dist_sq = matches[a].distance * matches[a].distance;
      if (bounded && dist_sq > max_dist_sq) continue;
      raw.push_back({active[a], matches[a].index, 1.0, dist_sq});
    }

    CorrespondenceSet corr;
    switch (params.variant.kind) {
      case IcpVariant::Kind::plain:
        corr = std::move(raw);
        break;
      case IcpVariant::Kind::trimmed:
        corr = trim_pairs(raw, params.variant.keep_fraction);
        break;
      case IcpVariant::Kind::fractional:
        corr = ficp_select(raw, params.variant.lambda).first;
        break;
      case IcpVariant::Kind::irls: {
        if (!irls_scale) {
          std::vector<double> residuals;
          residuals.reserve(raw.size());
          for (const Correspondence& p : raw) residuals.push_back(std::sqrt(p.squared_distance));
          const double med = detail::median_of(std::move(residuals));
          irls_scale = std::max(3.0 * med, 1e-9);
        }
        corr = irls_weights(raw, params.variant.kernel, *irls_scale);
        break;
      }
    }

    if (ext_weights != nullptr) {
      for (Correspondence& p : corr) p.weight *= ext_weights->weights[p.source_index];
    }

    double objective = 0.0;
    double weight_sum = 0.0;
    std::size_t effective = 0;
    for (const Correspondence& p : corr) {
      if (p.weight <= 0.0) continue;
      ++effective;
      weight_sum += p.weight;
      objective += p.weight * p.squared_distance;
    }

    const RigidTransform next = weighted_horn(source, target, corr);
    result.trace.push_back({next, objective, effective});
    result.iterations = iter + 1;
    result.final_rmsd = weight_sum > 0.0 ? std::sqrt(objective / weight_sum) : 0.0;

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

}  // namespace overlap_reg
