#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cli.hpp"
#include "spckd/checkpoint.hpp"
#include "spckd/data.hpp"
#include "spckd/report.hpp"

using namespace spckd;
namespace fs = std::filesystem;

namespace {

struct Sandbox {
  fs::path dir;
  Sandbox() : dir(fs::temp_directory_path() / "spckd_cli_test") {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Sandbox() { fs::remove_all(dir); }
  std::string path(const std::string& name) const {
    return (dir / name).string();
  }
};

void write_fixture_data(const Sandbox& sb) {
  Dataset train = synth_dataset(11, 12, 12, 12, 1);
  Dataset val = synth_dataset(12, 4, 12, 12, 1);
  Dataset test = synth_dataset(13, 4, 12, 12, 1);
  write_mstn(train.samples, sb.path("train.mstn"));
  write_mstn(val.samples, sb.path("val.mstn"));
  write_mstn(test.samples, sb.path("test.mstn"));
  std::ofstream manifest(sb.path("manifest.txt"));
  manifest << "train mstn " << sb.path("train.mstn") << "\n"
           << "val mstn " << sb.path("val.mstn") << "\n"
           << "test mstn " << sb.path("test.mstn") << "\n";
}

void write_config(const Sandbox& sb, const std::string& name,
                  const std::string& id, const std::string& role,
                  double gamma, const std::string& teacher = "") {
  std::ofstream os(sb.path(name));
  os << "{\n"
     << "  \"id\": \"" << id << "\",\n"
     << "  \"data\": {\"manifest\": \"" << sb.path("manifest.txt")
     << "\", \"image_rows\": 12, \"image_cols\": 12, \"bands\": 1},\n"
     << "  \"sensing\": {\"gamma\": " << gamma << ", \"mode\": \"binary\"},\n"
     << "  \"network\": {\"stages\": 2, \"channels\": 3},\n"
     << "  \"train\": {\"role\": \"" << role
     << "\", \"epochs\": 2, \"batch_size\": 6, \"learning_rate\": 0.001, "
     << "\"seed\": 5";
  if (!teacher.empty()) os << ", \"teacher_checkpoint\": \"" << teacher << "\"";
  os << "}\n}\n";
}

}  // namespace

TEST_CASE("cli: full train/distill/eval/report pipeline") {
  Sandbox sb;
  write_fixture_data(sb);
  write_config(sb, "teacher.json", "t0", "teacher", 0.8);

  CHECK(cli::run_command({"train-teacher", "--config", sb.path("teacher.json"),
                          "--out", sb.path("runs")}) == 0);
  REQUIRE(fs::exists(sb.path("runs/t0.spkd")));
  CHECK(fs::exists(sb.path("runs/t0.spca")));
  CHECK(fs::exists(sb.path("runs/t0.history.json")));

  write_config(sb, "student.json", "s0", "student-kd", 0.25,
               sb.path("runs/t0.spkd"));
  CHECK(cli::run_command({"distill", "--config", sb.path("student.json"),
                          "--out", sb.path("runs")}) == 0);
  REQUIRE(fs::exists(sb.path("runs/s0.spkd")));

  Checkpoint student = checkpoint_load(sb.path("runs/s0.spkd"));
  CHECK(student.config.train.teacher_gamma == 0.8);

  CHECK(cli::run_command({"eval", "--checkpoint", sb.path("runs/s0.spkd"),
                          "--data", sb.path("manifest.txt"), "--out",
                          sb.path("eval")}) == 0);
  REQUIRE(fs::exists(sb.path("eval/metrics.csv")));
  auto records = read_metrics_csv(sb.path("eval/metrics.csv"));
  REQUIRE(records.size() == 1);
  CHECK(records[0].role == "kd-sparse");
  CHECK(records[0].gamma_t == 0.8);

  CHECK(cli::run_command({"report", "--in", sb.path("eval/metrics.csv"),
                          "--out", sb.path("report")}) == 0);
  CHECK(fs::exists(sb.path("report/psnr_vs_gamma.svg")));
  CHECK(fs::exists(sb.path("report/stage_psnr.svg")));
  CHECK(fs::exists(sb.path("report/metrics.csv")));
}

TEST_CASE("cli: baseline role and seed override") {
  Sandbox sb;
  write_fixture_data(sb);
  write_config(sb, "base.json", "b0", "baseline", 0.3);
  CHECK(cli::run_command({"train-baseline", "--config", sb.path("base.json"),
                          "--out", sb.path("runs"), "--seed", "99"}) == 0);
  Checkpoint ck = checkpoint_load(sb.path("runs/b0.spkd"));
  CHECK(ck.config.train.seed == 99);
  CHECK(ck.config.train.role == TrainRole::Baseline);
}

TEST_CASE("cli: usage errors exit with 2") {
  Sandbox sb;
  CHECK(cli::run_command({}) == 2);
  CHECK(cli::run_command({"no-such-command"}) == 2);
  CHECK(cli::run_command({"train-teacher"}) == 2);  // missing --config
  CHECK(cli::run_command({"train-teacher", "--config",
                          sb.path("missing.json")}) == 2);
  CHECK(cli::run_command({"eval"}) == 2);  // missing --checkpoint/--data
  CHECK(cli::run_command({"report", "--in", sb.path("none.csv")}) == 2);
}

TEST_CASE("cli: runtime failures exit with 1") {
  Sandbox sb;
  write_fixture_data(sb);
  // Config validates but the referenced teacher checkpoint is unreadable.
  write_config(sb, "broken.json", "x0", "student-kd", 0.25,
               sb.path("missing.spkd"));
  CHECK(cli::run_command({"distill", "--config", sb.path("broken.json"),
                          "--out", sb.path("runs")}) == 1);
}
