#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "spckd/checkpoint.hpp"
#include "spckd/report.hpp"
#include "spckd/training.hpp"
#include "spckd/verify.hpp"

namespace spckd::cli {
namespace {

namespace fs = std::filesystem;

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::string data_manifest;
  std::string checkpoint_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

std::string role_label(const ExperimentConfig& config) {
  switch (config.train.role) {
    case TrainRole::Teacher: return "teacher";
    case TrainRole::Baseline: return "baseline";
    case TrainRole::StudentKD:
      return config.distill.feature_kind == FeatureKind::Sparse
                 ? "kd-sparse"
                 : "kd-nonsparse";
  }
  return "unknown";
}

ExperimentConfig load_with_overrides(const CommonOpts& opts, TrainRole role) {
  ExperimentConfig config = load_experiment_config(opts.config_path);
  config.train.role = role;
  if (role != TrainRole::StudentKD) config.train.teacher_checkpoint.clear();
  if (!opts.data_manifest.empty()) config.data.manifest = opts.data_manifest;
  if (!opts.checkpoint_path.empty() && role == TrainRole::StudentKD)
    config.train.teacher_checkpoint = opts.checkpoint_path;
  if (opts.seed_set) config.train.seed = opts.seed;
  validate_config(config);
  if (config.data.manifest.empty())
    throw UsageError("no dataset manifest (config data.manifest or --data)");
  return config;
}

void write_training_outputs(const ExperimentConfig& config,
                            const TrainOutput& out,
                            const std::string& out_dir) {
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  const std::string stem = config.id;
  checkpoint_save(out.checkpoint, (dir / (stem + ".spkd")).string());
  SpcSystem<float> best = system_from_checkpoint(out.checkpoint);
  export_aperture(best.bank, (dir / (stem + ".spca")).string());
  std::ofstream hist((dir / (stem + ".history.json")).string());
  hist << out.checkpoint.history_json << "\n";
  std::cout << "wrote " << (dir / (stem + ".spkd")).string() << "\n";
}

int run_training(const CommonOpts& opts, TrainRole role) {
  ExperimentConfig config = load_with_overrides(opts, role);
  Dataset train = load_split(config.data.manifest, Split::Train,
                             config.data.image_rows, config.data.image_cols,
                             config.data.bands, config.data.patch_size);
  Dataset val = load_split(config.data.manifest, Split::Val,
                           config.data.image_rows, config.data.image_cols,
                           config.data.bands, config.data.patch_size);
  std::cout << config.id << ": " << train.size() << " train / " << val.size()
            << " val samples, gamma=" << config.sensing.gamma
            << ", K=" << make_sensing_shape(config.sensing.gamma,
                                            config.data.image_rows,
                                            config.data.image_cols,
                                            config.data.bands)
                             .snapshots
            << "\n";

  TrainOutput out;
  if (role == TrainRole::StudentKD) {
    Checkpoint teacher = checkpoint_load(config.train.teacher_checkpoint);
    out = train_kd(config, train, val, teacher);
  } else {
    out = train_e2e(config, train, val);
  }
  for (const EpochRecord& r : out.history)
    std::printf("epoch %3zu: train_loss=%.6g val_psnr=%.3f\n", r.epoch,
                r.train_loss, r.val_psnr);
  std::printf("best epoch %zu\n", out.best_epoch);
  write_training_outputs(config, out, opts.out_dir);
  return 0;
}

int run_eval(const CommonOpts& opts) {
  if (opts.checkpoint_path.empty())
    throw UsageError("eval requires --checkpoint");
  if (opts.data_manifest.empty()) throw UsageError("eval requires --data");
  Checkpoint ckpt = checkpoint_load(opts.checkpoint_path);
  SpcSystem<float> sys = system_from_checkpoint(ckpt);
  const ExperimentConfig& config = ckpt.config;
  Dataset test = load_split(opts.data_manifest, Split::Test,
                            config.data.image_rows, config.data.image_cols,
                            config.data.bands, config.data.patch_size);
  if (test.empty()) throw UsageError("manifest has no test split");

  MetricRecord rec =
      evaluate_system(sys, test, config.id, role_label(config),
                      config.train.teacher_gamma, config.train.batch_size);
  fs::create_directories(opts.out_dir);
  const fs::path dir(opts.out_dir);
  write_metrics_csv({rec}, (dir / "metrics.csv").string());
  write_stage_psnr_csv({rec}, (dir / "stage_psnr.csv").string());
  std::printf("%s: psnr=%.3f dB ssim=%.4f over %zu samples (%.2fs)\n",
              rec.id.c_str(), rec.psnr_db, rec.ssim_mean, rec.sample_count,
              rec.seconds);
  return 0;
}

int run_gradcheck(bool tiny, std::uint64_t seed) {
  const std::size_t rows = tiny ? 8 : 10;
  const std::size_t stages = tiny ? 2 : 3;
  const std::size_t channels = 4;
  GradSuiteResult res =
      run_gradcheck_suite(rows, stages, channels, 0.5, seed);
  for (const GradSuiteCase& c : res.cases)
    std::printf("%-34s %.3e\n", c.name.c_str(), c.max_rel_error);
  std::printf("max relative error %.3e (seed %llu, %d instance%s)\n",
              res.worst, static_cast<unsigned long long>(res.seed_used),
              res.attempts, res.attempts == 1 ? "" : "s");
  if (!res.passed) {
    std::cout << "gradient check FAILED\n";
    return 1;
  }
  std::cout << "gradient check passed\n";
  return 0;
}

int run_report(const std::string& in_csv, const std::string& out_dir) {
  std::vector<MetricRecord> records = read_metrics_csv(in_csv);
  if (records.empty()) throw UsageError("'" + in_csv + "' has no records");
  const fs::path stage_file = fs::path(in_csv).parent_path() / "stage_psnr.csv";
  if (fs::exists(stage_file))
    merge_stage_psnr_csv(stage_file.string(), records);
  emit_report(records, out_dir);
  std::cout << "report written to " << out_dir << "\n";
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"single-pixel camera simulation, unrolled reconstruction and "
               "aperture distillation"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string report_in;
  bool tiny = false;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* c = cmd->add_option("--config", opts.config_path,
                              "experiment config (JSON)");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--data", opts.data_manifest, "dataset manifest");
    cmd->add_option("--checkpoint", opts.checkpoint_path, "checkpoint path");
    cmd->add_option("--seed", opts.seed, "seed override")
        ->each([&](const std::string&) { opts.seed_set = true; });
  };

  CLI::App* teacher = app.add_subcommand(
      "train-teacher", "end-to-end training of a teacher system");
  add_common(teacher, true);
  CLI::App* baseline = app.add_subcommand(
      "train-baseline", "end-to-end training of a baseline system");
  add_common(baseline, true);
  CLI::App* distill = app.add_subcommand(
      "distill", "knowledge-distillation training of a student system");
  add_common(distill, true);
  CLI::App* eval =
      app.add_subcommand("eval", "evaluate a checkpoint on a test split");
  add_common(eval, false);
  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "finite-difference verification of all gradients");
  gradcheck->add_flag("--tiny", tiny, "smallest verification system");
  gradcheck->add_option("--seed", opts.seed, "base seed")
      ->each([&](const std::string&) { opts.seed_set = true; });
  CLI::App* report = app.add_subcommand(
      "report", "tables and charts from collected metrics");
  report->add_option("--in", report_in, "metrics.csv produced by eval")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--out", opts.out_dir, "output directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      app.exit(e);
      return 0;
    }
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (teacher->parsed()) return run_training(opts, TrainRole::Teacher);
    if (baseline->parsed()) return run_training(opts, TrainRole::Baseline);
    if (distill->parsed()) return run_training(opts, TrainRole::StudentKD);
    if (eval->parsed()) return run_eval(opts);
    if (gradcheck->parsed())
      return run_gradcheck(tiny, opts.seed_set ? opts.seed : 42);
    if (report->parsed()) return run_report(report_in, opts.out_dir);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace spckd::cli
