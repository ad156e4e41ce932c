#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "overlap_reg/eoe.hpp"
#include "overlap_reg/error.hpp"
#include "overlap_reg/fov.hpp"
#include "overlap_reg/icp.hpp"
#include "overlap_reg/io/dataset.hpp"
#include "overlap_reg/view_sim.hpp"

namespace overlap_reg {

using Json = nlohmann::json;

namespace config_detail {

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const std::exception& e) {
    fail(ErrorCode::invalid_argument, std::string("config: bad value for '") + key + "': " + e.what());
  }
}

}  // namespace config_detail

enum class EoeMode { off, on, both };
enum class InitPolicy { identity, prior_pose_chain };

// One column family of the experiment matrix: a named base registrar.
struct AlgorithmSpec {
  std::string name;  // icp | trimmed | fractional | irls | gmm
  bool is_gmm = false;
  IcpParams icp;
  GmmBase gmm;
};

struct SyntheticDataset {
  std::string world = "builtin";  // "builtin" or a PLY path
  std::size_t world_points = 20000;
  std::uint64_t world_seed = 7;
  OrbitPreset orbit;
  std::string out_dir = "synth_out";  // where `synth` materializes frames
};

// Parsed, defaulted experiment configuration. The effective values are
// echoed verbatim into every results document.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = hardware
  std::string output = "results.json";
  InitPolicy init = InitPolicy::identity;

  bool dataset_is_synthetic = true;
  SyntheticDataset synthetic;
  DatasetManifest manifest;

  std::vector<AlgorithmSpec> algorithms;
  EoeMode eoe_mode = EoeMode::both;
  SensorFov fov_source;
  SensorFov fov_target;
  bool fov_given = false;  // false: synthetic runs inherit the orbit frustum
  PenaltyConstants penalty;
  EoeSchedule schedule;

  std::vector<std::size_t> timing_points = {100, 1000, 10000, 100000, 1000000};
  int timing_trials = 5;
};

inline SensorFov parse_fov(const Json& j) {
  using config_detail::get_or;
  SensorFov f;
  f.psi_min = get_or(j, "min_range", 0.0);
  f.psi_max = get_or(j, "max_range", std::numeric_limits<double>::infinity());
  f.psi_x = deg_to_rad(get_or(j, "horizontal_deg", 360.0));
  f.psi_y = deg_to_rad(get_or(j, "vertical_deg", 180.0));
  validate(f);
  return f;
}

inline Json fov_to_json(const SensorFov& f) {
  return Json{{"min_range", f.psi_min},
              {"max_range", f.psi_max},
              {"horizontal_deg", rad_to_deg(f.psi_x)},
              {"vertical_deg", rad_to_deg(f.psi_y)}};
}

inline RobustKernel parse_kernel(const std::string& name) {
  if (name == "welsch") return RobustKernel::welsch;
  if (name == "cauchy") return RobustKernel::cauchy;
  if (name == "huber") return RobustKernel::huber;
  fail(ErrorCode::invalid_argument, "config: unknown kernel '" + name + "'");
}

inline const char* kernel_name(RobustKernel k) {
  switch (k) {
    case RobustKernel::welsch: return "welsch";
    case RobustKernel::cauchy: return "cauchy";
    case RobustKernel::huber: return "huber";
  }
  return "welsch";
}

inline AlgorithmSpec parse_algorithm(const Json& j, const IcpParams& icp_defaults,
                                     std::uint64_t seed) {
  using config_detail::get_or;
  AlgorithmSpec spec;
  spec.name = get_or<std::string>(j, "name", "");
  spec.icp = icp_defaults;
  if (spec.name == "icp") {
    spec.icp.variant = IcpVariant::plain();
  } else if (spec.name == "trimmed") {
    spec.icp.variant = IcpVariant::trimmed(get_or(j, "keep_fraction", 0.85));
  } else if (spec.name == "fractional") {
    spec.icp.variant = IcpVariant::fractional(get_or(j, "lambda", 3.0));
  } else if (spec.name == "irls") {
    std::optional<double> scale;
    if (j.contains("scale") && !j["scale"].is_null()) scale = j["scale"].get<double>();
    spec.icp.variant = IcpVariant::irls(parse_kernel(get_or<std::string>(j, "kernel", "welsch")),
                                        scale);
  } else if (spec.name == "gmm") {
    spec.is_gmm = true;
    spec.gmm.components = get_or<std::size_t>(j, "components", 0);
    spec.gmm.seed = get_or<std::uint64_t>(j, "seed", seed);
    spec.gmm.fit.outlier_weight = get_or(j, "outlier_weight", 0.05);
    spec.gmm.fit.max_iterations = get_or(j, "fit_max_iterations", 100);
    spec.gmm.reg.max_iterations = icp_defaults.max_iterations;
    spec.gmm.reg.convergence_rot_deg = icp_defaults.convergence_rot_deg;
    spec.gmm.reg.convergence_trans = icp_defaults.convergence_trans;
  } else {
    fail(ErrorCode::invalid_argument, "config: unknown algorithm '" + spec.name + "'");
  }
  return spec;
}

inline Json algorithm_to_json(const AlgorithmSpec& a) {
  Json j{{"name", a.name}};
  if (a.is_gmm) {
    j["components"] = a.gmm.components;
    j["seed"] = a.gmm.seed;
    j["outlier_weight"] = a.gmm.fit.outlier_weight;
    j["fit_max_iterations"] = a.gmm.fit.max_iterations;
  } else {
    switch (a.icp.variant.kind) {
      case IcpVariant::Kind::trimmed: j["keep_fraction"] = a.icp.variant.keep_fraction; break;
      case IcpVariant::Kind::fractional: j["lambda"] = a.icp.variant.lambda; break;
      case IcpVariant::Kind::irls:
        j["kernel"] = kernel_name(a.icp.variant.kernel);
        j["scale"] = a.icp.variant.scale ? Json(*a.icp.variant.scale) : Json(nullptr);
        break;
      case IcpVariant::Kind::plain: break;
    }
  }
  return j;
}

inline ExperimentConfig parse_config(const Json& j) {
  using config_detail::get_or;
  if (!j.is_object()) fail(ErrorCode::invalid_argument, "config: root must be a JSON object");
  ExperimentConfig cfg;
  cfg.seed = get_or<std::uint64_t>(j, "seed", 1);
  cfg.threads = get_or(j, "threads", 0);
  cfg.output = get_or<std::string>(j, "output", "results.json");
  const std::string init = get_or<std::string>(j, "init", "identity");
  if (init == "identity") {
    cfg.init = InitPolicy::identity;
  } else if (init == "prior-pose-chain") {
    cfg.init = InitPolicy::prior_pose_chain;
  } else {
    fail(ErrorCode::invalid_argument, "config: unknown init policy '" + init + "'");
  }

  const Json dataset = j.contains("dataset") ? j["dataset"] : Json::object();
  const std::string ds_type = get_or<std::string>(dataset, "type", "synthetic");
  if (ds_type == "synthetic") {
    cfg.dataset_is_synthetic = true;
    SyntheticDataset& s = cfg.synthetic;
    s.world = get_or<std::string>(dataset, "world", "builtin");
    s.world_points = get_or<std::size_t>(dataset, "world_points", 20000);
    s.world_seed = get_or<std::uint64_t>(dataset, "world_seed", 7);
    s.orbit.num_views = get_or(dataset, "num_views", 5);
    s.orbit.yaw_step_deg = get_or(dataset, "yaw_step_deg", 25.0);
    s.orbit.fov_deg = get_or(dataset, "fov_deg", 60.0);
    s.orbit.psi_min = get_or(dataset, "min_range", 0.01);
    s.orbit.psi_max = get_or(dataset, "max_range", 10.0);
    s.orbit.orbit_radius = get_or(dataset, "orbit_radius", 2.2);
    s.orbit.noise_sigma = get_or(dataset, "noise_sigma", 0.0);
    s.orbit.seed = get_or<std::uint64_t>(dataset, "view_seed", cfg.seed);
    s.out_dir = get_or<std::string>(dataset, "out_dir", "synth_out");
  } else if (ds_type == "manifest") {
    cfg.dataset_is_synthetic = false;
    DatasetManifest& m = cfg.manifest;
    m.frames = get_or<std::vector<std::string>>(dataset, "frames", {});
    const std::string fmt = get_or<std::string>(dataset, "format", "ply");
    if (fmt == "ply") {
      m.format = FrameFormat::ply;
    } else if (fmt == "kitti_bin") {
      m.format = FrameFormat::kitti_bin;
    } else {
      fail(ErrorCode::invalid_argument, "config: unknown frame format '" + fmt + "'");
    }
    if (dataset.contains("gt_poses") && !dataset["gt_poses"].is_null()) {
      m.gt_poses_path = dataset["gt_poses"].get<std::string>();
    }
    if (dataset.contains("calib") && !dataset["calib"].is_null()) {
      m.calib_path = dataset["calib"].get<std::string>();
    }
    m.stride = get_or<std::size_t>(dataset, "stride", 1);
    if (dataset.contains("downsample") && !dataset["downsample"].is_null()) {
      m.downsample = dataset["downsample"].get<std::size_t>();
    }
    m.rng_seed = get_or<std::uint64_t>(dataset, "downsample_seed", cfg.seed);
  } else {
    fail(ErrorCode::invalid_argument, "config: unknown dataset type '" + ds_type + "'");
  }

  const Json icp_defaults_json = j.contains("icp") ? j["icp"] : Json::object();
  IcpParams icp_defaults;
  icp_defaults.max_iterations = get_or(icp_defaults_json, "max_iterations", 50);
  icp_defaults.convergence_rot_deg = get_or(icp_defaults_json, "convergence_rot_deg", 0.01);
  icp_defaults.convergence_trans = get_or(icp_defaults_json, "convergence_trans", 1e-4);
  icp_defaults.max_match_distance =
      get_or(icp_defaults_json, "max_match_distance",
             std::numeric_limits<double>::infinity());

  if (j.contains("algorithms")) {
    if (!j["algorithms"].is_array() || j["algorithms"].empty()) {
      fail(ErrorCode::invalid_argument, "config: 'algorithms' must be a non-empty array");
    }
    for (const Json& a : j["algorithms"]) {
      cfg.algorithms.push_back(parse_algorithm(a, icp_defaults, cfg.seed));
    }
  } else {
    for (const char* name : {"icp", "trimmed", "fractional", "irls", "gmm"}) {
      cfg.algorithms.push_back(parse_algorithm(Json{{"name", name}}, icp_defaults, cfg.seed));
    }
  }

  const Json eoe = j.contains("eoe") ? j["eoe"] : Json::object();
  const std::string mode = config_detail::get_or<std::string>(eoe, "mode", "both");
  if (mode == "off") {
    cfg.eoe_mode = EoeMode::off;
  } else if (mode == "on") {
    cfg.eoe_mode = EoeMode::on;
  } else if (mode == "both") {
    cfg.eoe_mode = EoeMode::both;
  } else {
    fail(ErrorCode::invalid_argument, "config: unknown eoe mode '" + mode + "'");
  }
  if (eoe.contains("fov_source") || eoe.contains("fov_target") || eoe.contains("fov")) {
    cfg.fov_given = true;
    const Json shared = eoe.contains("fov") ? eoe["fov"] : Json::object();
    cfg.fov_source = eoe.contains("fov_source") ? parse_fov(eoe["fov_source"]) : parse_fov(shared);
    cfg.fov_target = eoe.contains("fov_target") ? parse_fov(eoe["fov_target"]) : parse_fov(shared);
  }
  const Json penalty = eoe.contains("penalty") ? eoe["penalty"] : Json::object();
  cfg.penalty.k0 = get_or(penalty, "k0", 1.0);
  cfg.penalty.k1 = get_or(penalty, "k1", 1.0);
  cfg.penalty.k2 = get_or(penalty, "k2", 5.0);
  validate(cfg.penalty);
  const Json sched = eoe.contains("schedule") ? eoe["schedule"] : Json::object();
  cfg.schedule.max_outer_iterations = get_or(sched, "max_outer_iterations", 30);
  cfg.schedule.delta_rot_threshold_deg = get_or(sched, "delta_rot_threshold_deg", 0.05);
  cfg.schedule.delta_trans_threshold = get_or(sched, "delta_trans_threshold", 1e-3);
  cfg.schedule.symmetric = get_or(sched, "symmetric", true);
  cfg.schedule.vertical_mode = get_or(sched, "corrected_vertical", false)
                                   ? VerticalBoundMode::corrected
                                   : VerticalBoundMode::verbatim;
  validate(cfg.schedule);

  const Json timing = j.contains("timing") ? j["timing"] : Json::object();
  cfg.timing_points =
      config_detail::get_or<std::vector<std::size_t>>(timing, "points",
                                                      {100, 1000, 10000, 100000, 1000000});
  cfg.timing_trials = get_or(timing, "trials", 5);

  if (!cfg.dataset_is_synthetic && cfg.eoe_mode != EoeMode::off && !cfg.fov_given) {
    fail(ErrorCode::invalid_argument,
         "config: manifest datasets need an explicit eoe.fov/fov_source/fov_target");
  }
  return cfg;
}

// Effective (post-default) configuration, suitable for the results echo and
// for `validate-config` output.
inline Json config_echo(const ExperimentConfig& cfg) {
  Json dataset;
  if (cfg.dataset_is_synthetic) {
    const SyntheticDataset& s = cfg.synthetic;
    dataset = Json{{"type", "synthetic"},
                   {"world", s.world},
                   {"world_points", s.world_points},
                   {"world_seed", s.world_seed},
                   {"num_views", s.orbit.num_views},
                   {"yaw_step_deg", s.orbit.yaw_step_deg},
                   {"fov_deg", s.orbit.fov_deg},
                   {"min_range", s.orbit.psi_min},
                   {"max_range", s.orbit.psi_max},
                   {"orbit_radius", s.orbit.orbit_radius},
                   {"noise_sigma", s.orbit.noise_sigma},
                   {"view_seed", s.orbit.seed},
                   {"out_dir", s.out_dir}};
  } else {
    const DatasetManifest& m = cfg.manifest;
    dataset = Json{{"type", "manifest"},
                   {"frames", m.frames},
                   {"format", m.format == FrameFormat::ply ? "ply" : "kitti_bin"},
                   {"gt_poses", m.gt_poses_path ? Json(*m.gt_poses_path) : Json(nullptr)},
                   {"calib", m.calib_path ? Json(*m.calib_path) : Json(nullptr)},
                   {"stride", m.stride},
                   {"downsample", m.downsample ? Json(*m.downsample) : Json(nullptr)},
                   {"downsample_seed", m.rng_seed}};
  }
  Json algorithms = Json::array();
  for (const AlgorithmSpec& a : cfg.algorithms) algorithms.push_back(algorithm_to_json(a));

  const IcpParams& icp = cfg.algorithms.empty() ? IcpParams{} : cfg.algorithms.front().icp;
  const char* mode = cfg.eoe_mode == EoeMode::off ? "off"
                     : cfg.eoe_mode == EoeMode::on ? "on"
                                                   : "both";
  return Json{
      {"seed", cfg.seed},
      {"threads", cfg.threads},
      {"output", cfg.output},
      {"init", cfg.init == InitPolicy::identity ? "identity" : "prior-pose-chain"},
      {"dataset", dataset},
      {"algorithms", algorithms},
      {"icp",
       Json{{"max_iterations", icp.max_iterations},
            {"convergence_rot_deg", icp.convergence_rot_deg},
            {"convergence_trans", icp.convergence_trans},
            {"max_match_distance", std::isfinite(icp.max_match_distance)
                                       ? Json(icp.max_match_distance)
                                       : Json(nullptr)}}},
      {"eoe",
       Json{{"mode", mode},
            {"fov_source", cfg.fov_given ? fov_to_json(cfg.fov_source) : Json(nullptr)},
            {"fov_target", cfg.fov_given ? fov_to_json(cfg.fov_target) : Json(nullptr)},
            {"penalty", Json{{"k0", cfg.penalty.k0}, {"k1", cfg.penalty.k1}, {"k2", cfg.penalty.k2}}},
            {"schedule",
             Json{{"max_outer_iterations", cfg.schedule.max_outer_iterations},
                  {"delta_rot_threshold_deg", cfg.schedule.delta_rot_threshold_deg},
                  {"delta_trans_threshold", cfg.schedule.delta_trans_threshold},
                  {"symmetric", cfg.schedule.symmetric},
                  {"corrected_vertical",
                   cfg.schedule.vertical_mode == VerticalBoundMode::corrected}}}}},
      {"timing", Json{{"points", cfg.timing_points}, {"trials", cfg.timing_trials}}}};
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, path + ": cannot open config");
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail(ErrorCode::parse_error, path + ": " + e.what());
  }
  return parse_config(j);
}

// Existence checks for everything the config references on disk.
inline void validate_files(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  auto require = [](const std::string& p, const char* what) {
    if (!fs::exists(p)) {
      fail(ErrorCode::invalid_argument, std::string(what) + " does not exist: " + p);
    }
  };
  if (cfg.dataset_is_synthetic) {
    if (cfg.synthetic.world != "builtin") require(cfg.synthetic.world, "world cloud");
  } else {
    validate(cfg.manifest);
    for (const std::string& f : cfg.manifest.frames) require(f, "frame");
    if (cfg.manifest.gt_poses_path) require(*cfg.manifest.gt_poses_path, "ground-truth poses");
    if (cfg.manifest.calib_path) require(*cfg.manifest.calib_path, "calibration");
  }
}

}  // namespace overlap_reg
