#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "overlap_reg/eoe.hpp"
#include "overlap_reg/error.hpp"
#include "overlap_reg/transform.hpp"

namespace overlap_reg {

using Json = nlohmann::json;

inline constexpr int kResultsSchemaVersion = 1;

// Row-major 3x4 [R | t], the same layout KITTI pose files use.
inline Json transform_to_json(const RigidTransform& t) {
  Json a = Json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) a.push_back(t.rotation()(r, c));
    a.push_back(t.translation()(r));
  }
  return a;
}

inline RigidTransform transform_from_json(const Json& a) {
  if (!a.is_array() || a.size() != 12) {
    fail(ErrorCode::parse_error, "transform: expected 12-element array");
  }
  Eigen::Matrix3d rot;
  Eigen::Vector3d t;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rot(r, c) = a[static_cast<std::size_t>(4 * r + c)].get<double>();
    t(r) = a[static_cast<std::size_t>(4 * r + 3)].get<double>();
  }
  return RigidTransform(rot, t);
}

inline Json pose_error_to_json(const PoseError& e) {
  return Json{{"rotation_deg", e.rotation_deg},
              {"translation_m", e.translation_m},
              {"gimbal_lock", e.gimbal_lock}};
}

inline Json weight_stats_to_json(const WeightStats& s) {
  return Json{{"min_weight", s.min_weight},
              {"mean_weight", s.mean_weight},
              {"fraction_downweighted", s.fraction_downweighted}};
}

// One registration of one frame pair inside one experiment cell.
struct PairRecord {
  std::size_t target_frame = 0;  // earlier frame; registration target
  std::size_t source_frame = 0;  // later frame; moved onto the target
  bool failed = false;
  std::string failure_message;
  RigidTransform transform;
  std::optional<PoseError> error_vs_gt;
  bool converged = false;
  int iterations = 0;        // base-registrar iterations (last run, for EOE)
  int outer_iterations = 0;  // 0 when EOE is off
  double final_rmsd = 0.0;
  std::vector<OuterIterationRecord> weight_trace;  // per outer iteration
  double total_ms = 0.0;
};

// One (algorithm, eoe on/off) column of the experiment matrix.
struct CellRecord {
  std::string algorithm;
  bool eoe = false;
  std::vector<PairRecord> pairs;
  std::vector<RigidTransform> trajectory;  // compounded estimates, first frame = identity
};

struct CellSummary {
  double mean_rotation_deg = 0.0;
  double median_rotation_deg = 0.0;
  double mean_translation_m = 0.0;
  double median_translation_m = 0.0;
  std::size_t evaluated_pairs = 0;
  std::size_t failed_pairs = 0;
};

inline CellSummary summarize(const CellRecord& cell) {
  CellSummary s;
  std::vector<double> rot, trans;
  for (const PairRecord& p : cell.pairs) {
    if (p.failed) {
      ++s.failed_pairs;
      continue;
    }
    if (!p.error_vs_gt) continue;
    rot.push_back(p.error_vs_gt->rotation_deg);
    trans.push_back(p.error_vs_gt->translation_m);
  }
  s.evaluated_pairs = rot.size();
  if (rot.empty()) return s;
  auto mean = [](const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
  };
  auto median = [](std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double hi = v[mid];
    if (v.size() % 2 == 0) {
      const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
      return 0.5 * (lo + hi);
    }
    return hi;
  };
  s.mean_rotation_deg = mean(rot);
  s.median_rotation_deg = median(rot);
  s.mean_translation_m = mean(trans);
  s.median_translation_m = median(trans);
  return s;
}

struct ResultsDocument {
  std::string kind;  // "register", "synth", ...
  Json config;       // effective configuration echo
  std::vector<CellRecord> cells;
  double total_ms = 0.0;
};

inline Json cell_summary_to_json(const CellSummary& s) {
  return Json{{"mean_rotation_deg", s.mean_rotation_deg},
              {"median_rotation_deg", s.median_rotation_deg},
              {"mean_translation_m", s.mean_translation_m},
              {"median_translation_m", s.median_translation_m},
              {"evaluated_pairs", s.evaluated_pairs},
              {"failed_pairs", s.failed_pairs}};
}

inline Json results_to_json(const ResultsDocument& doc) {
  Json cells = Json::array();
  for (const CellRecord& cell : doc.cells) {
    Json pairs = Json::array();
    for (const PairRecord& p : cell.pairs) {
      Json jp{{"target_frame", p.target_frame},
              {"source_frame", p.source_frame},
              {"failed", p.failed}};
      if (p.failed) {
        jp["failure"] = p.failure_message;
      } else {
        jp["transform"] = transform_to_json(p.transform);
        jp["pose_error"] = p.error_vs_gt ? pose_error_to_json(*p.error_vs_gt) : Json(nullptr);
        jp["converged"] = p.converged;
        jp["iterations"] = p.iterations;
        jp["outer_iterations"] = p.outer_iterations;
        jp["final_rmsd"] = p.final_rmsd;
        Json trace = Json::array();
        for (const OuterIterationRecord& rec : p.weight_trace) {
          trace.push_back(Json{{"base_iterations", rec.base_iterations},
                               {"source", weight_stats_to_json(rec.source_weights)},
                               {"target", weight_stats_to_json(rec.target_weights)}});
        }
        jp["weight_trace"] = trace;
      }
      jp["timing"] = Json{{"total_ms", p.total_ms}};
      pairs.push_back(std::move(jp));
    }
    Json jc{{"algorithm", cell.algorithm},
            {"eoe", cell.eoe},
            {"pairs", std::move(pairs)},
            {"summary", cell_summary_to_json(summarize(cell))}};
    Json traj = Json::array();
    for (const RigidTransform& t : cell.trajectory) traj.push_back(transform_to_json(t));
    jc["trajectory"] = std::move(traj);
    cells.push_back(std::move(jc));
  }
  return Json{{"schema_version", kResultsSchemaVersion},
              {"kind", doc.kind},
              {"metadata", Json{{"euler_convention", "intrinsic-zyx"},
                                {"rotation_error", "mean absolute euler angle, degrees"}}},
              {"config", doc.config},
              {"cells", std::move(cells)},
              {"timing", Json{{"total_ms", doc.total_ms}}}};
}

// Structural check used on every document we read back; rejects anything
// without the version stamp or the core sections.
inline void validate_results_json(const Json& j) {
  if (!j.is_object()) fail(ErrorCode::parse_error, "results: not a JSON object");
  if (!j.contains("schema_version") || !j["schema_version"].is_number_integer()) {
    fail(ErrorCode::parse_error, "results: missing schema_version");
  }
  if (j["schema_version"].get<int>() != kResultsSchemaVersion) {
    fail(ErrorCode::parse_error,
         "results: unsupported schema_version " + j["schema_version"].dump());
  }
  for (const char* key : {"kind", "config", "cells", "timing"}) {
    if (!j.contains(key)) {
      fail(ErrorCode::parse_error, std::string("results: missing '") + key + "' section");
    }
  }
  if (!j["cells"].is_array()) fail(ErrorCode::parse_error, "results: 'cells' must be an array");
}

inline void write_result(const std::string& path, const ResultsDocument& doc) {
  const Json j = results_to_json(doc);
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_error, path + ": cannot open for writing");
  out << j.dump(2) << '\n';
  if (!out) fail(ErrorCode::io_error, path + ": write failed");
}

inline Json read_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, path + ": cannot open file");
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail(ErrorCode::parse_error, path + ": " + e.what());
  }
  validate_results_json(j);
  return j;
}

// Removes every "timing" object in the tree; used for byte-identical
// reproducibility comparisons.
inline Json strip_timing(Json j) {
  if (j.is_object()) {
    j.erase("timing");
    for (auto& [key, value] : j.items()) value = strip_timing(value);
  } else if (j.is_array()) {
    for (auto& value : j) value = strip_timing(value);
  }
  return j;
}

}  // namespace overlap_reg
