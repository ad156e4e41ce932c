// Benchmark harness for the registration toolkit: generates synthetic
// partial-overlap suites, runs algorithm x {EOE, no-EOE} matrices, probes
// the overlap-weight scaling, and dumps per-point weights for plotting.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "overlap_reg/overlap_reg.hpp"

namespace {

using namespace overlap_reg;

struct CommonOpts {
  std::string config_path;
  std::string output;
  int threads = -1;  // -1: leave config value in charge
  long long seed = -1;
  bool single_thread = false;
};

ExperimentConfig load_and_override(const CommonOpts& opts) {
  ExperimentConfig cfg =
      opts.config_path.empty() ? parse_config(Json::object()) : load_config(opts.config_path);
  if (!opts.output.empty()) cfg.output = opts.output;
  if (opts.threads >= 0) cfg.threads = opts.threads;
  if (opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed);
  if (opts.single_thread) cfg.threads = 1;
  set_thread_count(cfg.threads);
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required) {
  auto* c = cmd->add_option("--config", opts.config_path, "experiment config (JSON)");
  if (config_required) c->required();
  cmd->add_option("--output", opts.output, "override the config's output path");
  cmd->add_option("--threads", opts.threads, "worker threads (0 = hardware)");
  cmd->add_option("--seed", opts.seed, "override the config's seed");
  cmd->add_flag("--single-thread-determinism", opts.single_thread,
                "force single-threaded execution for byte-reproducible output");
}

int cmd_register(const CommonOpts& opts) {
  const ExperimentConfig cfg = load_and_override(opts);
  validate_files(cfg);
  const RegisterOutcome outcome = run_register(cfg);
  write_result(cfg.output, outcome.doc);

  const std::string csv_path = cfg.output + ".summary.csv";
  std::ofstream csv(csv_path);
  csv << render_summary_csv(outcome.doc);

  std::cout << render_summary_table(outcome.doc);
  std::cout << "results: " << cfg.output << "\nsummary: " << csv_path << "\n";
  return outcome.exit_code;
}

int cmd_synth(const CommonOpts& opts) {
  const ExperimentConfig cfg = load_and_override(opts);
  validate_files(cfg);
  const SynthOutcome out = run_synth(cfg);
  std::cout << "frames: " << out.frame_paths.size() << "\nposes: " << out.poses_path
            << "\noverlap report: " << out.overlap_path << "\nmanifest: " << out.manifest_path
            << "\n";
  for (std::size_t i = 0; i < out.pair_overlap.size(); ++i) {
    std::printf("overlap %zu-%zu: %.3f\n", i, i + 1, out.pair_overlap[i]);
  }
  return 0;
}

int cmd_timing(const CommonOpts& opts) {
  const ExperimentConfig cfg = load_and_override(opts);
  const TimingReport report = run_timing(cfg);
  const std::string csv_path = cfg.output.empty() ? "timing.csv" : cfg.output;
  std::ofstream csv(csv_path);
  csv << report.csv;
  std::cout << report.csv;
  std::printf("slope: %.9f ms/point\nr_squared: %.6f\ncsv: %s\n", report.slope_ms_per_point,
              report.r_squared, csv_path.c_str());
  return 0;
}

int cmd_weights(const CommonOpts& opts, std::size_t pair_index) {
  const ExperimentConfig cfg = load_and_override(opts);
  validate_files(cfg);
  const std::string stem = cfg.output.empty() ? "weights" : cfg.output;
  const WeightsDumpOutcome out = run_weights(cfg, pair_index, stem);
  std::cout << "source dump: " << out.source_path << " (" << out.source_rows << " rows)\n"
            << "target dump: " << out.target_path << " (" << out.target_rows << " rows)\n"
            << "source fraction downweighted: " << out.source_downweighted_fraction << "\n";
  return 0;
}

int cmd_validate(const CommonOpts& opts) {
  const ExperimentConfig cfg = load_and_override(opts);
  validate_files(cfg);
  std::cout << config_echo(cfg).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point cloud registration benchmark with expected overlap estimation"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::size_t pair_index = 0;

  auto* reg = app.add_subcommand("register", "run the registration experiment matrix");
  add_common(reg, opts, /*config_required=*/true);

  auto* synth = app.add_subcommand("synth", "materialize a synthetic partial-overlap dataset");
  add_common(synth, opts, /*config_required=*/true);

  auto* timing = app.add_subcommand("timing", "overlap-weight scaling probe");
  add_common(timing, opts, /*config_required=*/false);

  auto* weights = app.add_subcommand("weights", "dump per-point overlap weights for one pair");
  add_common(weights, opts, /*config_required=*/true);
  weights->add_option("--pair", pair_index, "pair index (0 = first consecutive pair)");

  auto* validate_cmd = app.add_subcommand("validate-config", "check a config and print it");
  add_common(validate_cmd, opts, /*config_required=*/true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (reg->parsed()) return cmd_register(opts);
    if (synth->parsed()) return cmd_synth(opts);
    if (timing->parsed()) return cmd_timing(opts);
    if (weights->parsed()) return cmd_weights(opts, pair_index);
    if (validate_cmd->parsed()) return cmd_validate(opts);
  } catch (const overlap_reg::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
