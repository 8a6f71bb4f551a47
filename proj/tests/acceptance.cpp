// Acceptance suite: one line per criterion, nonzero exit if any fails.
//
// Usage: spckd_acceptance [--criterion N] [--out DIR]
//
// Criterion 5 trains three full systems at desk scale and dominates the
// runtime; everything else finishes in seconds to minutes.
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "spckd/checkpoint.hpp"
#include "spckd/data.hpp"
#include "spckd/distill.hpp"
#include "spckd/metrics.hpp"
#include "spckd/random.hpp"
#include "spckd/recovery.hpp"
#include "spckd/report.hpp"
#include "spckd/sensing.hpp"
#include "spckd/training.hpp"
#include "spckd/verify.hpp"

using namespace spckd;
namespace fs = std::filesystem;

namespace {

std::string g_out_dir = "acceptance_out";

#define EXPECT(cond, what)                                             \
  do {                                                                 \
    if (!(cond)) {                                                     \
      log << "    expectation failed: " << what << "\n";               \
      ok = false;                                                      \
    }                                                                  \
  } while (0)

// ---------------------------------------------------------------------------
// 1. Adjoint/dot-product test, 100 random pairs, shapes up to 16x16x8.
bool criterion1(std::ostream& log) {
  bool ok = true;
  Rng rng(101);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t rows = 2 + rng.below(15);
    const std::size_t cols = 2 + rng.below(15);
    const std::size_t bands = 1 + rng.below(8);
    const double gamma = rng.uniform(0.05, 1.0);
    const ApertureMode mode =
        rep % 2 ? ApertureMode::Binary : ApertureMode::RealValued;
    auto bank = build_sensing<double>(gamma, rows, cols, bands, mode,
                                      1000 + rep);
    Tensor<double> x({bank.shape.scene_size()});
    Tensor<double> w({bank.shape.measurement_size()});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1, 1);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-1, 1);

    const Tensor<double> hx = spc_forward(bank, x);
    Tensor<double> htw = reproject(bank, w);
    for (std::size_t i = 0; i < htw.size(); ++i)
      htw[i] *= static_cast<double>(bank.shape.snapshots);

    const double gap = std::abs(dot(hx, w) - dot(x, htw));
    worst = std::max(worst, gap);
  }
  log << "    worst |<Hx,w> - <x,H^T w>| = " << worst << "\n";
  EXPECT(worst <= 1e-10, "adjoint gap <= 1e-10");
  return ok;
}

// ---------------------------------------------------------------------------
// 2. Gradient correctness on the tiny system, every parameter class, both
//    objectives, eps = 1e-5, max relative error <= 1e-4.
bool criterion2(std::ostream& log) {
  bool ok = true;
  GradSuiteResult res = run_gradcheck_suite(8, 2, 4, 0.5, 42, 1e-5, 1e-4, 8);
  for (const GradSuiteCase& c : res.cases) {
    std::ostringstream line;
    line << "    " << c.name;
    for (std::size_t pad = line.str().size(); pad < 44; ++pad) line << ' ';
    line << c.max_rel_error;
    log << line.str() << "\n";
  }
  log << "    max relative error " << res.worst << " (seed " << res.seed_used
      << ", " << res.attempts << " conditioned instance(s))\n";
  EXPECT(res.passed, "gradient suite passed with fault-injection canary");
  EXPECT(res.worst <= 1e-4, "max relative error <= 1e-4");
  return ok;
}

// ---------------------------------------------------------------------------
// 3. Unrolling oracle equivalence on 20 random instances.
template <typename T>
double oracle_gap(std::size_t m, std::size_t stages, std::size_t bands,
                  std::uint64_t seed) {
  auto bank = build_sensing<T>(0.4, m, m, bands,
                               seed % 2 ? ApertureMode::Binary
                                        : ApertureMode::RealValued,
                               seed);
  auto net = make_recovery_net<T>(stages, ProxConfig{3}, bank.shape,
                                  seed + 1);
  Rng rng(seed + 2);
  Tensor<T> x({bank.shape.scene_size()});
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = static_cast<T>(rng.uniform(0, 1));
  auto y = spc_forward(bank, x);

  Tape<T> tape;
  Var h = bank.realize_on(tape);
  auto trace = unrolled_forward(tape, net, h, tape.leaf(y));
  const Tensor<T>& got = tape.value(trace.reconstruction());

  auto expect = oracles::unrolled_reference(
      net, bank.realized(), std::vector<T>(y.data(), y.data() + y.size()));
  double gap = 0.0;
  for (std::size_t i = 0; i < expect.size(); ++i)
    gap = std::max(gap, std::abs(static_cast<double>(got[i]) -
                                 static_cast<double>(expect[i])));
  return gap;
}

bool criterion3(std::ostream& log) {
  bool ok = true;
  Rng rng(301);
  double worst32 = 0.0, worst64 = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t m = 3 + rng.below(6);       // up to 8
    const std::size_t stages = 1 + rng.below(4);  // up to 4
    const std::size_t bands = 1 + rng.below(2);
    const std::uint64_t seed = 3000 + 7 * rep;
    worst32 = std::max(worst32, oracle_gap<float>(m, stages, bands, seed));
    worst64 = std::max(worst64, oracle_gap<double>(m, stages, bands, seed));
  }
  log << "    max |unrolled - reference|: f32 " << worst32 << ", f64 "
      << worst64 << "\n";
  EXPECT(worst32 <= 1e-6, "f32 gap <= 1e-6");
  EXPECT(worst64 <= 1e-12, "f64 gap <= 1e-12");
  return ok;
}

// ---------------------------------------------------------------------------
// 4. Distillation identities.
bool criterion4(std::ostream& log) {
  bool ok = true;

  // Identical teacher/student traces give exactly zero KD loss.
  auto sys = make_system<double>(0.5, 6, 6, 1, ApertureMode::Binary, 3, 2, 9);
  Dataset scenes = synth_dataset(40, 2, 6, 6, 1);
  Tensor<double> batch({2, sys.bank.shape.scene_size()});
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t i = 0; i < sys.bank.shape.scene_size(); ++i)
      batch[s * sys.bank.shape.scene_size() + i] = scenes.samples[s][i];
  auto trace = sys.run(batch);
  DistillConfig cfg;
  EXPECT(kd_loss_value(trace, trace, cfg) == 0.0,
         "kd_loss == 0 for identical traces");

  // Unit diagonal, and exp(-1) at squared distance 1e6 with 1/(2s^2)=1e-6.
  FeatureMatrix<double> pair;
  pair.rows.push_back(Tensor<double>({1}, {0.0}));
  pair.rows.push_back(Tensor<double>({1}, {1000.0}));
  Tensor<double> eta = rbf_correlation(pair, 1e-6);
  EXPECT(eta[0] == 1.0 && eta[3] == 1.0, "eta diagonal exactly 1");
  const double expected_kernel = 0.36787944117144233;
  log << "    kernel at d^2=1e6: " << eta[1] << " vs exp(-1) "
      << expected_kernel << "\n";
  EXPECT(std::abs(eta[1] - expected_kernel) <= 1e-12,
         "exp(-1) kernel value to 1e-12");

  // Hand case: eta_t all ones, eta_s off-diagonal exp(-1):
  // ||.||_F = sqrt(2 (1 - 1/e)^2) = sqrt(2) (1 - 1/e) = 0.8939533...
  // (The module example quotes 0.893937; the exact evaluation of its own
  // formula is 0.893953, so the computed oracle value is asserted.)
  FeatureMatrix<double> ft;
  ft.rows.assign(2, Tensor<double>({3}, {1.0, 2.0, 3.0}));
  const double cc = cc_loss(ft, pair, cfg);
  const double hand = std::sqrt(2.0) * (1.0 - std::exp(-1.0));
  log << "    cc hand case: " << cc << " vs sqrt(2)(1-1/e) = " << hand
      << " (spec quotes 0.893937)\n";
  EXPECT(std::abs(cc - hand) <= 1e-6, "cc hand case to 1e-6");
  return ok;
}

// ---------------------------------------------------------------------------
// 5. Table-1 ordering at desk scale.
bool criterion5(std::ostream& log) {
  bool ok = true;
  const std::size_t rows = 32, cols = 32;
  const std::uint64_t data_seed = 501;
  const std::uint64_t model_seed = 1205;
  Dataset train = synth_dataset(data_seed, 2000, rows, cols, 1);
  Dataset val = synth_dataset(data_seed + 1, 200, rows, cols, 1);
  Dataset test = synth_dataset(data_seed + 2, 500, rows, cols, 1);

  ExperimentConfig base;
  base.data.image_rows = rows;
  base.data.image_cols = cols;
  base.network.stages = 7;
  base.network.channels = 32;
  base.train.epochs = 10;
  base.train.batch_size = 32;
  base.train.seed = model_seed;

  auto stamp = [] { return std::chrono::steady_clock::now(); };
  auto secs = [](auto a, auto b) {
    return std::chrono::duration<double>(b - a).count();
  };

  // Teacher: binary CAs at gamma_t = 0.8, lr 1e-4.
  ExperimentConfig tcfg = base;
  tcfg.id = "teacher-g0.8";
  tcfg.sensing.gamma = 0.8;
  tcfg.train.role = TrainRole::Teacher;
  tcfg.train.learning_rate = 1e-4;
  auto t0 = stamp();
  TrainOutput teacher = train_e2e(tcfg, train, val);
  SpcSystem<float> teacher_sys = system_from_checkpoint(teacher.checkpoint);
  MetricRecord teacher_rec =
      evaluate_system(teacher_sys, test, tcfg.id, "teacher", 0.0);
  log << "    teacher   gamma_t=0.8: " << teacher_rec.psnr_db << " dB, ssim "
      << teacher_rec.ssim_mean << "  (" << secs(t0, stamp()) << "s)\n";

  std::vector<MetricRecord> records{teacher_rec};
  auto student_cfg = [&](const std::string& id, double gamma,
                         TrainRole role, FeatureKind kind) {
    ExperimentConfig c = base;
    c.id = id;
    c.sensing.gamma = gamma;
    c.train.role = role;
    c.train.learning_rate = role == TrainRole::StudentKD ? 1e-3 : 1e-4;
    if (role == TrainRole::StudentKD) {
      c.train.teacher_checkpoint = "(in-memory)";
      c.distill.feature_kind = kind;
    }
    return c;
  };
  auto run_student = [&](const ExperimentConfig& c) {
    auto s0 = stamp();
    TrainOutput out = c.train.role == TrainRole::StudentKD
                          ? train_kd(c, train, val, teacher.checkpoint)
                          : train_e2e(c, train, val);
    SpcSystem<float> sys = system_from_checkpoint(out.checkpoint);
    const std::string role =
        c.train.role == TrainRole::Baseline
            ? "baseline"
            : (c.distill.feature_kind == FeatureKind::Sparse ? "kd-sparse"
                                                             : "kd-nonsparse");
    MetricRecord rec = evaluate_system(
        sys, test, c.id, role,
        c.train.role == TrainRole::StudentKD ? tcfg.sensing.gamma : 0.0);
    log << "    " << role << " gamma_s=" << c.sensing.gamma << ": "
        << rec.psnr_db << " dB, ssim " << rec.ssim_mean << "  ("
        << secs(s0, stamp()) << "s)\n";
    records.push_back(rec);
    return rec;
  };

  MetricRecord baseline = run_student(student_cfg(
      "baseline-g0.2", 0.2, TrainRole::Baseline, FeatureKind::Sparse));
  MetricRecord kd = run_student(student_cfg(
      "kd-sparse-g0.2", 0.2, TrainRole::StudentKD, FeatureKind::Sparse));

  log << "    ordering: PSNR(kd-sparse) - PSNR(baseline) = "
      << kd.psnr_db - baseline.psnr_db << " dB (need >= 0.3)\n";
  EXPECT(kd.psnr_db >= baseline.psnr_db + 0.3,
         "KD-sparse beats the baseline by at least 0.3 dB at gamma_s=0.2");

  // Reported, not asserted: sparse vs non-sparse knowledge at gamma_s=0.3.
  MetricRecord sparse3 = run_student(student_cfg(
      "kd-sparse-g0.3", 0.3, TrainRole::StudentKD, FeatureKind::Sparse));
  MetricRecord nonsparse3 = run_student(student_cfg(
      "kd-nonsparse-g0.3", 0.3, TrainRole::StudentKD, FeatureKind::NonSparse));
  log << "    report-only at gamma_s=0.3: sparse " << sparse3.psnr_db
      << " dB vs non-sparse " << nonsparse3.psnr_db << " dB\n";

  emit_report(records, g_out_dir);
  log << "    metrics and charts written to " << g_out_dir << "\n";
  return ok;
}

// ---------------------------------------------------------------------------
// 6. Smoke convergence within 200 iterations.
bool criterion6(std::ostream& log) {
  bool ok = true;
  Dataset train = synth_dataset(601, 16, 8, 8, 1);

  ExperimentConfig cfg;
  cfg.id = "smoke";
  cfg.data.image_rows = 8;
  cfg.data.image_cols = 8;
  cfg.network.stages = 2;
  cfg.network.channels = 4;
  cfg.sensing.gamma = 0.5;
  cfg.train.role = TrainRole::Teacher;
  cfg.train.epochs = 200;  // batch == dataset, one step per epoch
  cfg.train.batch_size = 16;
  cfg.train.learning_rate = 1e-3;
  cfg.train.seed = 602;

  TrainOutput e2e = train_e2e(cfg, train, Dataset{});
  log << "    e2e loss: " << e2e.step_losses.front() << " -> "
      << e2e.step_losses.back() << " in " << e2e.step_losses.size()
      << " iterations\n";
  EXPECT(e2e.step_losses.size() <= 200, "at most 200 iterations");
  EXPECT(e2e.step_losses.back() <= 0.5 * e2e.step_losses.front(),
         "E2E loss halves within 200 iterations");

  ExperimentConfig tcfg = cfg;
  tcfg.id = "smoke-teacher";
  tcfg.sensing.gamma = 0.8;
  tcfg.train.epochs = 60;
  TrainOutput teacher = train_e2e(tcfg, train, Dataset{});

  ExperimentConfig scfg = cfg;
  scfg.id = "smoke-student";
  scfg.sensing.gamma = 0.2;
  scfg.train.role = TrainRole::StudentKD;
  scfg.train.teacher_checkpoint = "(in-memory)";
  TrainOutput kd = train_kd(scfg, train, Dataset{}, teacher.checkpoint);
  log << "    kd loss:  " << kd.step_losses.front() << " -> "
      << kd.step_losses.back() << " in " << kd.step_losses.size()
      << " iterations\n";
  EXPECT(kd.step_losses.back() <= 0.5 * kd.step_losses.front(),
         "KD loss halves within 200 iterations");
  return ok;
}

// ---------------------------------------------------------------------------
// 7. Frozen teacher (byte-identical checkpoint) and seeded determinism.
bool criterion7(std::ostream& log) {
  bool ok = true;
  Dataset train = synth_dataset(701, 16, 8, 8, 1);
  Dataset val = synth_dataset(702, 4, 8, 8, 1);

  ExperimentConfig tcfg;
  tcfg.id = "det-teacher";
  tcfg.data.image_rows = 8;
  tcfg.data.image_cols = 8;
  tcfg.network.stages = 2;
  tcfg.network.channels = 4;
  tcfg.sensing.gamma = 0.8;
  tcfg.train.role = TrainRole::Teacher;
  tcfg.train.epochs = 4;
  tcfg.train.batch_size = 8;
  tcfg.train.learning_rate = 1e-3;
  tcfg.train.seed = 703;
  TrainOutput teacher = train_e2e(tcfg, train, val);

  fs::create_directories(g_out_dir);
  const std::string teacher_path =
      (fs::path(g_out_dir) / "det-teacher.spkd").string();
  checkpoint_save(teacher.checkpoint, teacher_path);
  auto file_bytes = [](const std::string& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)),
                       std::istreambuf_iterator<char>());
  };
  const std::string before = file_bytes(teacher_path);

  ExperimentConfig scfg = tcfg;
  scfg.id = "det-student";
  scfg.sensing.gamma = 0.2;
  scfg.train.role = TrainRole::StudentKD;
  scfg.train.teacher_checkpoint = teacher_path;
  scfg.train.seed = 704;
  Checkpoint loaded = checkpoint_load(teacher_path);
  TrainOutput kd1 = train_kd(scfg, train, val, loaded);
  const std::string after = file_bytes(teacher_path);
  EXPECT(before == after, "teacher checkpoint byte-identical after KD");

  TrainOutput kd2 = train_kd(scfg, train, val, loaded);
  TrainOutput e2e1 = train_e2e(tcfg, train, val);
  TrainOutput e2e2 = train_e2e(tcfg, train, val);
  double worst = 0.0;
  for (std::size_t i = 0; i < kd1.step_losses.size(); ++i)
    worst = std::max(worst, std::abs(kd1.step_losses[i] - kd2.step_losses[i]));
  for (std::size_t i = 0; i < e2e1.step_losses.size(); ++i)
    worst = std::max(worst,
                     std::abs(e2e1.step_losses[i] - e2e2.step_losses[i]));
  log << "    worst same-seed loss-curve gap: " << worst << "\n";
  EXPECT(worst <= 1e-7, "same-seed loss curves equal to 1e-7");
  return ok;
}

// ---------------------------------------------------------------------------
// 8. Format round-trips: IDX, MSTN, checkpoint, metrics CSV.
bool criterion8(std::ostream& log) {
  bool ok = true;
  fs::create_directories(g_out_dir);
  const fs::path dir(g_out_dir);

  {  // IDX fixture with known bytes.
    const std::string p = (dir / "fixture.idx").string();
    std::ofstream os(p, std::ios::binary);
    const unsigned char bytes[] = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2,
                                   0, 0, 0, 2, 0, 1, 2, 3, 4, 5, 6, 7};
    os.write(reinterpret_cast<const char*>(bytes), sizeof(bytes));
    os.close();
    Tensor<float> t = read_idx(p);
    bool exact = t.shape() == Shape{2, 2, 2};
    for (int i = 0; i < 8 && exact; ++i)
      exact = t[i] == static_cast<float>(i) / 255.0f;
    EXPECT(exact, "IDX fixture parses to the expected values exactly");
  }
  {  // MSTN round-trip.
    Dataset ds = synth_dataset(801, 3, 5, 4, 8);
    const std::string p = (dir / "roundtrip.mstn").string();
    write_mstn(ds.samples, p);
    auto back = read_mstn(p);
    bool exact = back.size() == ds.samples.size();
    for (std::size_t s = 0; s < back.size() && exact; ++s)
      for (std::size_t i = 0; i < back[s].size() && exact; ++i)
        exact = back[s][i] == ds.samples[s][i];
    EXPECT(exact, "MSTN write -> read is bit-identical");
  }
  {  // Checkpoint round-trip.
    auto sys = make_system<float>(0.4, 8, 8, 1, ApertureMode::Binary, 2, 3,
                                  802);
    ExperimentConfig cfg;
    cfg.id = "fmt";
    cfg.data.image_rows = 8;
    cfg.data.image_cols = 8;
    cfg.sensing.gamma = 0.4;
    cfg.network.stages = 2;
    cfg.network.channels = 3;
    cfg.train.seed = 802;
    Checkpoint ck = make_checkpoint(cfg, sys, 3, "[{\"epoch\":0}]");
    const std::string p = (dir / "roundtrip.spkd").string();
    checkpoint_save(ck, p);
    Checkpoint back = checkpoint_load(p);
    bool exact = back.epoch == ck.epoch &&
                 back.history_json == ck.history_json &&
                 back.tensors.size() == ck.tensors.size();
    for (std::size_t i = 0; i < ck.tensors.size() && exact; ++i) {
      exact = back.tensors[i].first == ck.tensors[i].first;
      for (std::size_t k = 0; k < ck.tensors[i].second.size() && exact; ++k)
        exact = back.tensors[i].second[k] == ck.tensors[i].second[k];
    }
    EXPECT(exact, "checkpoint save -> load is bit-identical");
  }
  {  // Metrics CSV round-trip.
    MetricRecord r;
    r.id = "fmt";
    r.role = "teacher";
    r.gamma_t = 0.0;
    r.gamma_s = 0.33333333333333331;
    r.psnr_db = 31.415926535897931;
    r.ssim_mean = 0.97123456789012345;
    r.seconds = 2.5;
    const std::string p = (dir / "metrics.csv").string();
    write_metrics_csv({r}, p);
    auto back = read_metrics_csv(p);
    EXPECT(back.size() == 1 && back[0].id == r.id && back[0].role == r.role &&
               back[0].gamma_s == r.gamma_s && back[0].psnr_db == r.psnr_db &&
               back[0].ssim_mean == r.ssim_mean &&
               back[0].seconds == r.seconds,
           "metrics CSV round-trips exactly");
  }
  return ok;
}

struct Entry {
  int id;
  const char* title;
  bool (*run)(std::ostream&);
};

const Entry kCriteria[] = {
    {1, "adjoint consistency of the sensing operator", criterion1},
    {2, "gradient correctness for every parameter class", criterion2},
    {3, "unrolling matches the straight-line reference", criterion3},
    {4, "distillation identities", criterion4},
    {5, "KD-vs-baseline ordering at desk scale", criterion5},
    {6, "smoke convergence within 200 iterations", criterion6},
    {7, "frozen teacher and seeded determinism", criterion7},
    {8, "on-disk format round-trips", criterion8},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc)
      only = std::atoi(argv[++i]);
    else if (std::strcmp(argv[i], "--out") == 0 && i + 1 < argc)
      g_out_dir = argv[++i];
    else {
      std::cerr << "usage: spckd_acceptance [--criterion N] [--out DIR]\n";
      return 2;
    }
  }

  int failures = 0;
  for (const Entry& e : kCriteria) {
    if (only != 0 && e.id != only) continue;
    std::ostringstream log;
    const auto start = std::chrono::steady_clock::now();
    bool ok = false;
    try {
      ok = e.run(log);
    } catch (const std::exception& ex) {
      log << "    exception: " << ex.what() << "\n";
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::printf("[%s] criterion %d: %s (%.1fs)\n", ok ? "PASS" : "FAIL", e.id,
                e.title, secs);
    std::fputs(log.str().c_str(), stdout);
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
