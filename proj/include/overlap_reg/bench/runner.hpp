#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "overlap_reg/bench/config.hpp"
#include "overlap_reg/eoe.hpp"
#include "overlap_reg/io/results.hpp"
#include "overlap_reg/log.hpp"
#include "overlap_reg/view_sim.hpp"

namespace overlap_reg {

// Frames and ground truth resolved from either dataset flavor, ready for
// pairwise registration.
struct PreparedDataset {
  std::vector<PointCloud> frames;
  std::vector<std::size_t> frame_ids;              // original indices (stride applied)
  std::vector<RigidTransform> relative_gt;         // per consecutive pair, when known
  bool has_gt = false;
  SensorFov fov_source;
  SensorFov fov_target;
};

inline PointCloud load_world(const SyntheticDataset& s) {
  if (s.world == "builtin") return make_lumpy_cloud(s.world_points, s.world_seed);
  return read_ply(s.world);
}

inline PreparedDataset prepare_dataset(const ExperimentConfig& cfg) {
  PreparedDataset out;
  if (cfg.dataset_is_synthetic) {
    const PointCloud world = load_world(cfg.synthetic);
    const std::vector<ViewSpec> specs = orbit_views(cfg.synthetic.orbit);
    ViewSequence seq = make_sequence(world, specs);
    for (std::size_t i = 0; i < seq.views.size(); ++i) {
      out.frames.push_back(std::move(seq.views[i].cloud));
      out.frame_ids.push_back(i);
    }
    out.relative_gt = std::move(seq.relative_ground_truth);
    out.has_gt = true;
    const SensorFov orbit_fov = SensorFov::symmetric_deg(
        cfg.synthetic.orbit.fov_deg, cfg.synthetic.orbit.psi_min, cfg.synthetic.orbit.psi_max);
    out.fov_source = cfg.fov_given ? cfg.fov_source : orbit_fov;
    out.fov_target = cfg.fov_given ? cfg.fov_target : orbit_fov;
  } else {
    validate(cfg.manifest);
    out.frame_ids = strided_frames(cfg.manifest);
    for (std::size_t id : out.frame_ids) out.frames.push_back(load_frame(cfg.manifest, id));
    if (cfg.manifest.gt_poses_path) {
      const std::vector<RigidTransform> poses = read_kitti_poses(*cfg.manifest.gt_poses_path);
      std::optional<RigidTransform> calib;
      if (cfg.manifest.calib_path) calib = read_kitti_calib(*cfg.manifest.calib_path);
      for (std::size_t i = 0; i + 1 < out.frame_ids.size(); ++i) {
        out.relative_gt.push_back(
            relative_ground_truth(poses, out.frame_ids[i], out.frame_ids[i + 1], calib));
      }
      out.has_gt = true;
    }
    out.fov_source = cfg.fov_source;
    out.fov_target = cfg.fov_target;
  }
  if (out.frames.size() < 2) {
    fail(ErrorCode::invalid_argument, "dataset: need at least 2 frames to register");
  }
  return out;
}

namespace runner_detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

// Registers one (source = frames[i+1], target = frames[i]) pair under one
// algorithm, with or without the EOE wrapper.
inline PairRecord run_pair(const AlgorithmSpec& algo, bool use_eoe, const PreparedDataset& data,
                           std::size_t pair_index, const ExperimentConfig& cfg,
                           const RigidTransform& init) {
  const PointCloud& target = data.frames[pair_index];
  const PointCloud& source = data.frames[pair_index + 1];
  PairRecord rec;
  rec.target_frame = data.frame_ids[pair_index];
  rec.source_frame = data.frame_ids[pair_index + 1];

  const auto start = std::chrono::steady_clock::now();
  try {
    if (use_eoe) {
      BaseRegistrar base;
      if (algo.is_gmm) {
        base = algo.gmm;
      } else {
        base = algo.icp;
      }
      const EoeResult r = eoe_register(source, target, base, data.fov_source, data.fov_target,
                                       cfg.penalty, cfg.schedule, init);
      rec.transform = r.transform;
      rec.converged = r.converged;
      rec.iterations = r.base.iterations;
      rec.outer_iterations = r.outer_iterations;
      rec.final_rmsd = r.base.final_rmsd;
      rec.weight_trace = r.trace;
    } else {
      RegistrationResult r;
      if (algo.is_gmm) {
        const std::size_t k = algo.gmm.components > 0
                                  ? algo.gmm.components
                                  : default_component_count(target.size());
        const GaussianMixture model = fit_gmm(target, k, algo.gmm.seed, algo.gmm.fit);
        r = register_gmm(model, source, nullptr, init, algo.gmm.reg);
      } else {
        r = register_icp(source, target, algo.icp, nullptr, init);
      }
      rec.transform = r.transform;
      rec.converged = r.converged;
      rec.iterations = r.iterations;
      rec.final_rmsd = r.final_rmsd;
    }
    if (data.has_gt) {
      rec.error_vs_gt = pose_error_euler(rec.transform, data.relative_gt[pair_index]);
    }
  } catch (const Error& e) {
    rec.failed = true;
    rec.failure_message = e.what();
    log(LogLevel::warn, "pair %zu/%zu [%s%s] failed: %s", rec.target_frame, rec.source_frame,
        algo.name.c_str(), use_eoe ? "+eoe" : "", e.what());
  }
  rec.total_ms = elapsed_ms(start);
  return rec;
}

}  // namespace runner_detail

struct RegisterOutcome {
  ResultsDocument doc;
  int exit_code = 0;  // 0 all cells fine, 2 some pair failed
};

// The full experiment matrix: every (algorithm, eoe-mode) cell over every
// consecutive strided frame pair. Failures are recorded per pair and the run
// continues.
inline RegisterOutcome run_register(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const PreparedDataset data = prepare_dataset(cfg);

  std::vector<bool> modes;
  if (cfg.eoe_mode == EoeMode::off) {
    modes = {false};
  } else if (cfg.eoe_mode == EoeMode::on) {
    modes = {true};
  } else {
    modes = {false, true};
  }

  RegisterOutcome outcome;
  outcome.doc.kind = "register";
  outcome.doc.config = config_echo(cfg);

  for (const AlgorithmSpec& algo : cfg.algorithms) {
    for (bool use_eoe : modes) {
      CellRecord cell;
      cell.algorithm = algo.name;
      cell.eoe = use_eoe;
      cell.trajectory.push_back(RigidTransform::identity());
      RigidTransform prior = RigidTransform::identity();
      for (std::size_t pair = 0; pair + 1 < data.frames.size(); ++pair) {
        const RigidTransform init =
            cfg.init == InitPolicy::prior_pose_chain ? prior : RigidTransform::identity();
        PairRecord rec = runner_detail::run_pair(algo, use_eoe, data, pair, cfg, init);
        if (rec.failed) {
          outcome.exit_code = 2;
          // Trajectory compounding treats a failed pair as no motion.
          cell.trajectory.push_back(cell.trajectory.back());
        } else {
          prior = rec.transform;
          cell.trajectory.push_back(cell.trajectory.back() * rec.transform);
        }
        cell.pairs.push_back(std::move(rec));
      }
      const CellSummary s = summarize(cell);
      log(LogLevel::info, "cell %s%s: mean rot %.3f deg, mean trans %.4f m, %zu/%zu pairs",
          cell.algorithm.c_str(), use_eoe ? "+eoe" : "", s.mean_rotation_deg,
          s.mean_translation_m, s.evaluated_pairs, cell.pairs.size());
      outcome.doc.cells.push_back(std::move(cell));
    }
  }
  outcome.doc.total_ms = runner_detail::elapsed_ms(start);
  return outcome;
}

// Aligned plain-text summary table (one row per cell).
inline std::string render_summary_table(const ResultsDocument& doc) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "algorithm" << std::setw(6) << "eoe" << std::right
     << std::setw(14) << "mean rot (d)" << std::setw(14) << "med rot (d)" << std::setw(14)
     << "mean trans(m)" << std::setw(14) << "med trans(m)" << std::setw(8) << "pairs"
     << std::setw(8) << "failed" << '\n';
  for (const CellRecord& cell : doc.cells) {
    const CellSummary s = summarize(cell);
    os << std::left << std::setw(12) << cell.algorithm << std::setw(6)
       << (cell.eoe ? "on" : "off") << std::right << std::fixed << std::setprecision(4)
       << std::setw(14) << s.mean_rotation_deg << std::setw(14) << s.median_rotation_deg
       << std::setw(14) << s.mean_translation_m << std::setw(14) << s.median_translation_m
       << std::setw(8) << s.evaluated_pairs << std::setw(8) << s.failed_pairs << '\n';
  }
  return os.str();
}

// CSV twin of the summary table.
inline std::string render_summary_csv(const ResultsDocument& doc) {
  std::ostringstream os;
  os << "algorithm,eoe,mean_rotation_deg,median_rotation_deg,mean_translation_m,"
        "median_translation_m,evaluated_pairs,failed_pairs\n";
  os << std::setprecision(17);
  for (const CellRecord& cell : doc.cells) {
    const CellSummary s = summarize(cell);
    os << cell.algorithm << ',' << (cell.eoe ? "on" : "off") << ',' << s.mean_rotation_deg << ','
       << s.median_rotation_deg << ',' << s.mean_translation_m << ',' << s.median_translation_m
       << ',' << s.evaluated_pairs << ',' << s.failed_pairs << '\n';
  }
  return os.str();
}

struct SynthOutcome {
  std::string manifest_path;
  std::vector<std::string> frame_paths;
  std::string poses_path;
  std::string overlap_path;
  std::vector<double> pair_overlap;  // consecutive-pair overlap fractions
};

// Materializes the synthetic suite on disk: PLY frames, sensor-to-world
// poses (KITTI 3x4 text layout), consecutive-pair overlap report, and a
// manifest the `register` command can consume directly.
inline SynthOutcome run_synth(const ExperimentConfig& cfg) {
  if (!cfg.dataset_is_synthetic) {
    fail(ErrorCode::invalid_argument, "synth: config dataset.type must be 'synthetic'");
  }
  namespace fs = std::filesystem;
  const SyntheticDataset& s = cfg.synthetic;
  fs::create_directories(s.out_dir);

  const PointCloud world = load_world(s);
  const std::vector<ViewSpec> specs = orbit_views(s.orbit);
  const ViewSequence seq = make_sequence(world, specs);

  SynthOutcome out;
  char name[64];
  for (std::size_t i = 0; i < seq.views.size(); ++i) {
    std::snprintf(name, sizeof(name), "frame_%03zu.ply", i);
    const std::string path = (fs::path(s.out_dir) / name).string();
    write_ply(path, seq.views[i].cloud);
    out.frame_paths.push_back(path);
  }

  out.poses_path = (fs::path(s.out_dir) / "poses.txt").string();
  {
    std::ofstream poses(out.poses_path);
    if (!poses) fail(ErrorCode::io_error, out.poses_path + ": cannot open for writing");
    poses << std::setprecision(17);
    for (const SimulatedView& v : seq.views) {
      const Eigen::Matrix3d& r = v.pose.rotation();
      const Eigen::Vector3d& t = v.pose.translation();
      for (int row = 0; row < 3; ++row) {
        poses << r(row, 0) << ' ' << r(row, 1) << ' ' << r(row, 2) << ' ' << t(row)
              << (row == 2 ? "" : " ");
      }
      poses << '\n';
    }
  }

  const SensorFov fov = SensorFov::symmetric_deg(s.orbit.fov_deg, s.orbit.psi_min, s.orbit.psi_max);
  out.overlap_path = (fs::path(s.out_dir) / "overlap.csv").string();
  {
    std::ofstream ov(out.overlap_path);
    if (!ov) fail(ErrorCode::io_error, out.overlap_path + ": cannot open for writing");
    ov << "frame_a,frame_b,overlap_fraction\n" << std::setprecision(17);
    for (std::size_t i = 0; i + 1 < seq.views.size(); ++i) {
      // relative_ground_truth[i] maps frame i+1 into frame i.
      const double frac = overlap_fraction(seq.views[i + 1].cloud, seq.views[i].cloud, fov, fov,
                                           seq.relative_ground_truth[i]);
      out.pair_overlap.push_back(frac);
      ov << i << ',' << i + 1 << ',' << frac << '\n';
    }
  }

  out.manifest_path = (fs::path(s.out_dir) / "manifest.json").string();
  {
    Json manifest{{"dataset",
                   Json{{"type", "manifest"},
                        {"frames", out.frame_paths},
                        {"format", "ply"},
                        {"gt_poses", out.poses_path},
                        {"stride", 1}}},
                  {"eoe", Json{{"mode", "both"}, {"fov", fov_to_json(fov)}}},
                  {"seed", cfg.seed}};
    std::ofstream mf(out.manifest_path);
    if (!mf) fail(ErrorCode::io_error, out.manifest_path + ": cannot open for writing");
    mf << manifest.dump(2) << '\n';
  }
  return out;
}

struct TimingReport {
  std::vector<TimingSample> samples;
  double slope_ms_per_point = 0.0;
  double r_squared = 0.0;
  std::string csv;
};

// Least-squares line through (n, median_ms) plus the fit quality.
inline void fit_line(const std::vector<TimingSample>& samples, double& slope, double& r2) {
  const std::size_t n = samples.size();
  double sx = 0, sy = 0;
  for (const TimingSample& s : samples) {
    sx += static_cast<double>(s.n);
    sy += s.median_ms;
  }
  const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (const TimingSample& s : samples) {
    const double dx = static_cast<double>(s.n) - mx;
    const double dy = s.median_ms - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  slope = sxx > 0.0 ? sxy / sxx : 0.0;
  double ss_res = 0.0;
  for (const TimingSample& s : samples) {
    const double pred = my + slope * (static_cast<double>(s.n) - mx);
    ss_res += (s.median_ms - pred) * (s.median_ms - pred);
  }
  r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
}

inline TimingReport run_timing(const ExperimentConfig& cfg) {
  TimingReport report;
  for (std::size_t n : cfg.timing_points) {
    report.samples.push_back(weight_timing_probe(n, cfg.timing_trials, cfg.seed));
    log(LogLevel::info, "timing: n=%zu median %.3f ms", n, report.samples.back().median_ms);
  }
  fit_line(report.samples, report.slope_ms_per_point, report.r_squared);
  std::ostringstream csv;
  csv << "n,median_ms\n" << std::setprecision(17);
  for (const TimingSample& s : report.samples) csv << s.n << ',' << s.median_ms << '\n';
  report.csv = csv.str();
  return report;
}

struct WeightsDumpOutcome {
  std::string source_path;
  std::string target_path;
  std::size_t source_rows = 0;
  std::size_t target_rows = 0;
  double source_downweighted_fraction = 0.0;
};

// Runs one pair to convergence under EOE and dumps x,y,z,weight per point of
// both clouds at the final overlap estimate.
inline WeightsDumpOutcome run_weights(const ExperimentConfig& cfg, std::size_t pair_index,
                                      const std::string& output_stem) {
  const PreparedDataset data = prepare_dataset(cfg);
  if (pair_index + 1 >= data.frames.size()) {
    fail(ErrorCode::invalid_argument, "weights: pair index out of range");
  }
  if (cfg.algorithms.empty()) fail(ErrorCode::invalid_argument, "weights: no algorithms");
  const AlgorithmSpec& algo = cfg.algorithms.front();
  const PointCloud& target = data.frames[pair_index];
  const PointCloud& source = data.frames[pair_index + 1];

  BaseRegistrar base;
  if (algo.is_gmm) {
    base = algo.gmm;
  } else {
    base = algo.icp;
  }
  const EoeResult r = eoe_register(source, target, base, data.fov_source, data.fov_target,
                                   cfg.penalty, cfg.schedule, RigidTransform::identity());

  const OverlapWeights src_w = calc_omega_weights(source, r.transform.inverse(), data.fov_target,
                                                  cfg.penalty, cfg.schedule.vertical_mode);
  const OverlapWeights tgt_w = calc_omega_weights(target, r.transform, data.fov_source,
                                                  cfg.penalty, cfg.schedule.vertical_mode);

  WeightsDumpOutcome out;
  auto dump = [](const std::string& path, const PointCloud& cloud, const OverlapWeights& w) {
    std::ofstream os(path);
    if (!os) fail(ErrorCode::io_error, path + ": cannot open for writing");
    os << "x,y,z,weight\n" << std::setprecision(17);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      os << cloud.points[i].x() << ',' << cloud.points[i].y() << ',' << cloud.points[i].z() << ','
         << w.weights[i] << '\n';
    }
  };
  out.source_path = output_stem + ".source.csv";
  out.target_path = output_stem + ".target.csv";
  dump(out.source_path, source, src_w);
  dump(out.target_path, target, tgt_w);
  out.source_rows = source.size();
  out.target_rows = target.size();
  out.source_downweighted_fraction = summarize(src_w).fraction_downweighted;
  return out;
}

}  // namespace overlap_reg
