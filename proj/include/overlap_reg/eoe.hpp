#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "overlap_reg/gmm.hpp"
#include "overlap_reg/icp.hpp"
#include "overlap_reg/omega.hpp"
#include "overlap_reg/point_cloud.hpp"
#include "overlap_reg/transform.hpp"

namespace overlap_reg {

// Outer-loop schedule for expected overlap estimation.
struct EoeSchedule {
  int max_outer_iterations = 30;
  double delta_rot_threshold_deg = 0.05;
  double delta_trans_threshold = 1e-3;  // m
  bool symmetric = true;                // weight both clouds (and the model, for GMM)
  VerticalBoundMode vertical_mode = VerticalBoundMode::verbatim;
};

inline void validate(const EoeSchedule& s) {
  if (s.max_outer_iterations < 1) {
    fail(ErrorCode::invalid_argument, "eoe: max_outer_iterations must be >= 1");
  }
  if (!(s.delta_rot_threshold_deg > 0.0) || !(s.delta_trans_threshold > 0.0)) {
    fail(ErrorCode::invalid_argument, "eoe: convergence thresholds must be positive");
  }
}

// Base registrar selection. ICP variants carry their own matching policy;
// the GMM base additionally needs fit parameters (component count 0 = pick
// from the target size) and a seed for the one-time model fit.
struct GmmBase {
  std::size_t components = 0;
  std::uint64_t seed = 0;
  GmmFitParams fit;
  GmmRegParams reg;
};

using BaseRegistrar = std::variant<IcpParams, GmmBase>;

struct OuterIterationRecord {
  RigidTransform transform;
  int base_iterations = 0;
  WeightStats source_weights;
  WeightStats target_weights;
};

struct EoeResult {
  RigidTransform transform;
  int outer_iterations = 0;
  bool converged = false;
  RegistrationResult base;  // result of the final base-registrar run
  std::vector<OuterIterationRecord> trace;
};

namespace detail {

inline OverlapWeights unit_weights(std::size_t n) {
  OverlapWeights w;
  w.weights.assign(n, 1.0);
  w.penalties.assign(n, 0.0);
  return w;
}

// Target points whose overlap weight fell under the gate leave the
// nearest-neighbor index entirely; the mapping back to original indices is
// not needed by callers (results only carry transforms).
inline PointCloud gate_cloud(const PointCloud& c, const OverlapWeights& w) {
  PointCloud out;
  out.points.reserve(c.size());
  const bool has_intensity = c.has_intensity();
  if (has_intensity) out.intensity.reserve(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (w.weights[i] < kWeightGate) continue;
    out.points.push_back(c.points[i]);
    if (has_intensity) out.intensity.push_back(c.intensity[i]);
  }
  return out;
}

}  // namespace detail

// Expected overlap estimation wrapped around a base registrar.
//
// Step 1 (once): fit the spatial model - a GMM for the GMM base, implicit
// for ICP. Then alternate: Step 2 runs the base registrar under the current
// overlap weights (ICP: source-point weights gate matching and scale pairs,
// gated target points leave the index; GMM: point weights plus the
// reweighted model). Step 3 re-estimates the overlap from the new pose:
// target points are projected into the source sensor's frame via T and
// source points into the target frame via T^-1 (symmetric mode). Step 4
// stops when the pose change falls under both thresholds, when the overlap
// estimate reproduces itself exactly (fixed point - this is what makes a
// full-sphere FOV run bit-identical to the bare base registrar), or at the
// iteration cap.
//
// If the overlap estimate collapses after the first iteration (no supported
// points or a fully penalized model), the best pose so far is returned
// flagged not-converged rather than failing the whole run.
inline EoeResult eoe_register(const PointCloud& source, const PointCloud& target,
                              const BaseRegistrar& base, const SensorFov& fov_source,
                              const SensorFov& fov_target, const PenaltyConstants& k,
                              const EoeSchedule& sched = {},
                              const RigidTransform& init = RigidTransform()) {
  validate(fov_source);
  validate(fov_target);
  validate(k);
  validate(sched);
  if (source.size() < 3 || target.size() < 3) {
    fail(ErrorCode::invalid_argument, "eoe_register: clouds must have >= 3 points");
  }

  // Step 1: model fit (GMM base only), on the full target cloud.
  const GmmBase* gmm = std::get_if<GmmBase>(&base);
  std::optional<GaussianMixture> model;
  if (gmm != nullptr) {
    const std::size_t kcount =
        gmm->components > 0 ? gmm->components : default_component_count(target.size());
    model = fit_gmm(target, kcount, gmm->seed, gmm->fit);
  }

  EoeResult result;
  result.trace.reserve(static_cast<std::size_t>(sched.max_outer_iterations));
  RigidTransform current = init;
  OverlapWeights src_w = detail::unit_weights(source.size());
  OverlapWeights tgt_w = detail::unit_weights(target.size());
  GaussianMixture active_model = model ? *model : GaussianMixture{};
  bool have_result = false;

  for (int outer = 0; outer < sched.max_outer_iterations; ++outer) {
    RegistrationResult base_result;
    try {
      if (gmm != nullptr) {
        base_result = register_gmm(active_model, source, &src_w, current, gmm->reg);
      } else {
        const IcpParams& icp = std::get<IcpParams>(base);
        const PointCloud gated = detail::gate_cloud(target, tgt_w);
        if (gated.size() < 3) fail(ErrorCode::no_overlap_support, "no overlap support");
        base_result = register_icp(source, gated, icp, &src_w, current);
      }
    } catch (const Error& e) {
      const bool overlap_collapse = e.code() == ErrorCode::no_overlap_support ||
                                    e.code() == ErrorCode::no_model_support ||
                                    e.code() == ErrorCode::model_outside_overlap;
      if (overlap_collapse && have_result) {
        result.converged = false;
        return result;  // best-so-far
      }
      fail(e.code(),
           "EOE outer iteration " + std::to_string(outer + 1) + ": " + e.what());
    }

    const RigidTransform next = base_result.transform;

    // Step 3: re-estimate the overlap from the new pose.
    OverlapWeights new_src =
        calc_omega_weights(source, next.inverse(), fov_target, k, sched.vertical_mode);
    OverlapWeights new_tgt = sched.symmetric
                                 ? calc_omega_weights(target, next, fov_source, k,
                                                      sched.vertical_mode)
                                 : detail::unit_weights(target.size());

    GaussianMixture next_model;
    bool model_collapsed = false;
    if (gmm != nullptr && sched.symmetric) {
      try {
        next_model = reweight_model(*model, fov_source, next, k, sched.vertical_mode);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::model_outside_overlap || !have_result) {
          fail(e.code(),
               "EOE outer iteration " + std::to_string(outer + 1) + ": " + e.what());
        }
        model_collapsed = true;
      }
    } else if (gmm != nullptr) {
      next_model = *model;
    }

    result.trace.push_back(
        {next, base_result.iterations, summarize(new_src), summarize(new_tgt)});
    result.outer_iterations = outer + 1;

    const PoseError delta = transform_delta(current, next);
    const bool stationary_weights =
        new_src.weights == src_w.weights && new_tgt.weights == tgt_w.weights &&
        (gmm == nullptr || model_collapsed || next_model.weights == active_model.weights);

    current = next;
    result.transform = next;
    result.base = std::move(base_result);
    have_result = true;
    src_w = std::move(new_src);
    tgt_w = std::move(new_tgt);
    if (gmm != nullptr && !model_collapsed) active_model = std::move(next_model);

    if (model_collapsed) {
      result.converged = false;
      return result;  // overlap estimate collapsed; keep the best pose
    }
    if (delta.within(sched.delta_rot_threshold_deg, sched.delta_trans_threshold) ||
        stationary_weights) {
      result.converged = true;
      break;
    }
  }

  return result;
}

}  // namespace overlap_reg
