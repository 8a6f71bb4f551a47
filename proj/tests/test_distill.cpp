#include <doctest.h>

#include <cmath>
#include <vector>

#include "spckd/distill.hpp"
#include "spckd/gradcheck.hpp"
#include "spckd/random.hpp"
#include "spckd/recovery.hpp"
#include "spckd/sensing.hpp"

using namespace spckd;

namespace {

// Teacher/student pair on the same scenes; returns detached traces.
template <typename T>
struct Duo {
  CodedApertureBank<T> bank_t, bank_s;
  RecoveryNet<T> net_t, net_s;
  Tensor<T> scenes;

  TraceValues<T> run(CodedApertureBank<T>& bank, RecoveryNet<T>& net) {
    Tape<T> tape;
    Var h = bank.realize_on(tape);
    Var y = spc_forward(tape, h, tape.leaf(scenes), bank.shape);
    auto trace = unrolled_forward(tape, net, h, y);
    return detach(tape, trace);
  }
};

template <typename T>
Duo<T> make_duo(std::size_t batch, std::uint64_t seed, bool same = false) {
  Duo<T> duo;
  duo.bank_t = build_sensing<T>(0.8, 6, 6, 1, ApertureMode::Binary, seed);
  duo.bank_s = same ? duo.bank_t
                    : build_sensing<T>(0.25, 6, 6, 1, ApertureMode::Binary,
                                       seed + 1);
  duo.net_t = make_recovery_net<T>(3, ProxConfig{2}, duo.bank_t.shape, seed + 2);
  duo.net_s = same ? duo.net_t
                   : make_recovery_net<T>(3, ProxConfig{2}, duo.bank_s.shape,
                                          seed + 3);
  Rng rng(seed + 4);
  duo.scenes = Tensor<T>({batch, duo.bank_t.shape.scene_size()});
  for (std::size_t i = 0; i < duo.scenes.size(); ++i)
    duo.scenes[i] = static_cast<T>(rng.uniform(0, 1));
  return duo;
}

}  // namespace

TEST_CASE("extract_features: row counts, lengths, determinism") {
  auto bank = build_sensing<float>(0.3, 5, 4, 2, ApertureMode::Binary, 50);
  auto net = make_recovery_net<float>(7, ProxConfig{3}, bank.shape, 51);
  Rng rng(52);
  Tensor<float> x({1, bank.shape.scene_size()});
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = static_cast<float>(rng.uniform(0, 1));

  auto run = [&]() {
    Tape<float> t;
    Var h = bank.realize_on(t);
    auto tr = unrolled_forward(t, net, h, spc_forward(t, h, t.leaf(x), bank.shape));
    return detach(t, tr);
  };
  auto tv = run();
  auto sparse = extract_features(tv, FeatureKind::Sparse);
  auto dense = extract_features(tv, FeatureKind::NonSparse);
  CHECK(sparse.stage_count() == 7);
  CHECK(dense.stage_count() == 7);
  // M*N*C*J and M*N*J respectively.
  CHECK(sparse.rows[0].size() == 5 * 4 * 3 * 2);
  CHECK(dense.rows[0].size() == 5 * 4 * 2);

  auto tv2 = run();
  auto sparse2 = extract_features(tv2, FeatureKind::Sparse);
  for (std::size_t k = 0; k < 7; ++k)
    for (std::size_t i = 0; i < sparse.rows[k].size(); ++i)
      CHECK(sparse.rows[k][i] == sparse2.rows[k][i]);
}

TEST_CASE("rbf_correlation identities") {
  // Identical rows: all distances vanish and the matrix is all ones.
  FeatureMatrix<double> same;
  same.rows.assign(3, Tensor<double>({4}, {0.5, -1.0, 2.0, 0.0}));
  auto ones = rbf_correlation(same, 1e-6);
  for (std::size_t i = 0; i < ones.size(); ++i) CHECK(ones[i] == 1.0);

  // Squared distance 1e6 at the default coefficient gives exactly exp(-1).
  FeatureMatrix<double> pair;
  pair.rows.push_back(Tensor<double>({1}, {0.0}));
  pair.rows.push_back(Tensor<double>({1}, {1000.0}));
  auto eta = rbf_correlation(pair, 1e-6);
  CHECK(std::abs(eta[1] - std::exp(-1.0)) <= 1e-12);
  CHECK(std::abs(eta[1] - 0.36787944117144233) <= 1e-12);
  CHECK(eta[0] == 1.0);
  CHECK(eta[3] == 1.0);
  CHECK(eta[1] == eta[2]);

  CHECK_THROWS_AS(rbf_correlation(pair, 0.0), ConfigError);
}

TEST_CASE("cc_loss: zero at equality, symmetric, hand-evaluated case") {
  Rng rng(60);
  FeatureMatrix<double> a, b;
  for (int k = 0; k < 4; ++k) {
    Tensor<double> ra({6}), rb({6});
    for (std::size_t i = 0; i < 6; ++i) {
      ra[i] = rng.uniform(-1, 1);
      rb[i] = rng.uniform(-1, 1);
    }
    a.rows.push_back(ra);
    b.rows.push_back(rb);
  }
  DistillConfig cfg;
  cfg.inv_two_sigma_sq = 0.05;
  CHECK(cc_loss(a, a, cfg) == 0.0);
  CHECK(cc_loss(a, b, cfg) == doctest::Approx(cc_loss(b, a, cfg)).epsilon(1e-15));
  CHECK(cc_loss(a, b, cfg) >= 0.0);

  // eta_t = all ones (identical rows), eta_s off-diagonal exp(-1):
  // ||eta_t - eta_s||_F = sqrt(2 (1 - 1/e)^2) = sqrt(2) (1 - 1/e).
  FeatureMatrix<double> ft, fs;
  ft.rows.assign(2, Tensor<double>({3}, {1.0, 2.0, 3.0}));
  fs.rows.push_back(Tensor<double>({1}, {0.0}));      // lengths may differ
  fs.rows.push_back(Tensor<double>({1}, {1000.0}));   // between t and s
  DistillConfig paper;
  paper.inv_two_sigma_sq = 1e-6;
  const double expected = std::sqrt(2.0) * (1.0 - std::exp(-1.0));
  CHECK(std::abs(cc_loss(ft, fs, paper) - expected) <= 1e-12);
  CHECK(std::abs(cc_loss(ft, fs, paper) - 0.893953) <= 1e-6);

  FeatureMatrix<double> short_one;
  short_one.rows.assign(3, Tensor<double>({3}));
  CHECK_THROWS_AS(cc_loss(ft, short_one, paper), ShapeError);
}

TEST_CASE("cc_loss is invariant under joint stage relabeling") {
  Rng rng(61);
  FeatureMatrix<double> ft, fs;
  for (int k = 0; k < 5; ++k) {
    Tensor<double> rt({8}), rs({8});
    for (std::size_t i = 0; i < 8; ++i) {
      rt[i] = rng.uniform(-2, 2);
      rs[i] = rng.uniform(-2, 2);
    }
    ft.rows.push_back(rt);
    fs.rows.push_back(rs);
  }
  DistillConfig cfg;
  cfg.inv_two_sigma_sq = 0.01;
  const double base = cc_loss(ft, fs, cfg);

  const std::size_t perm[5] = {3, 0, 4, 2, 1};
  FeatureMatrix<double> ft2, fs2;
  for (std::size_t k : perm) {
    ft2.rows.push_back(ft.rows[k]);
    fs2.rows.push_back(fs.rows[k]);
  }
  CHECK(cc_loss(ft2, fs2, cfg) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("imitation_loss definition") {
  Tensor<double> a({4}, {1.0, 2.0, 3.0, 4.0});
  CHECK(imitation_loss(a, a) == 0.0);

  Tensor<double> b({4}, {1.5, 2.5, 3.5, 4.5});
  CHECK(imitation_loss(a, b) == doctest::Approx(4 * 0.25).epsilon(1e-15));

  Tensor<double> xs({2}, {1.0, 2.0});
  Tensor<double> xt({2}, {0.0, 0.0});
  CHECK(imitation_loss(xs, xt) == 5.0);
  CHECK_THROWS_AS(imitation_loss(xs, a), ShapeError);
}

TEST_CASE("kd_loss: self-distillation degenerate case is exactly zero") {
  auto duo = make_duo<double>(2, 70, /*same=*/true);
  auto trace = duo.run(duo.bank_t, duo.net_t);
  DistillConfig cfg;
  CHECK(kd_loss_value(trace, trace, cfg) == 0.0);
}

TEST_CASE("kd_loss: decomposition, batch average, tape/detached agreement") {
  auto duo = make_duo<double>(2, 80);
  auto teacher = duo.run(duo.bank_t, duo.net_t);
  auto student = duo.run(duo.bank_s, duo.net_s);

  DistillConfig cfg;
  cfg.inv_two_sigma_sq = 1e-3;
  cfg.cc_weight = 0.7;
  cfg.im_weight = 1.3;

  // Per-sample decomposition identity and the batch mean.
  double manual = 0;
  for (std::size_t b = 0; b < 2; ++b) {
    const auto ft = extract_features(teacher, cfg.feature_kind, b);
    const auto fs = extract_features(student, cfg.feature_kind, b);
    Tensor<double> xs({student.x_stages.back().shape()[1]});
    Tensor<double> xt({teacher.x_stages.back().shape()[1]});
    for (std::size_t i = 0; i < xs.size(); ++i) {
      xs[i] = student.x_stages.back()[b * xs.size() + i];
      xt[i] = teacher.x_stages.back()[b * xt.size() + i];
    }
    manual += cfg.cc_weight * cc_loss(ft, fs, cfg) +
              cfg.im_weight * imitation_loss(xs, xt);
  }
  manual /= 2.0;
  CHECK(kd_loss_value(student, teacher, cfg) ==
        doctest::Approx(manual).epsilon(1e-12));

  // The differentiable path computes the same value.
  Tape<double> tape;
  Var h = duo.bank_s.realize_on(tape);
  Var y = spc_forward(tape, h, tape.leaf(duo.scenes), duo.bank_s.shape);
  auto student_tr = unrolled_forward(tape, duo.net_s, h, y);
  auto targets = make_distill_targets(teacher, cfg);
  Var loss = kd_loss(tape, student_tr, targets, cfg);
  CHECK(tape.value(loss).item() == doctest::Approx(manual).epsilon(1e-10));
}

TEST_CASE("kd_loss gradients: student passes FD, teacher stays at zero") {
  auto duo = make_duo<double>(1, 90);
  auto teacher_trace = duo.run(duo.bank_t, duo.net_t);
  DistillConfig cfg;
  cfg.inv_two_sigma_sq = 1e-2;
  auto targets = make_distill_targets(teacher_trace, cfg);

  auto build = [&](Tape<double>& t) {
    Var h = duo.bank_s.realize_on(t);
    Var y = spc_forward(t, h, t.leaf(duo.scenes), duo.bank_s.shape);
    auto tr = unrolled_forward(t, duo.net_s, h, y);
    return kd_loss(t, tr, targets, cfg);
  };
  auto eval = [&]() {
    Tape<double> t;
    return t.value(build(t)).item();
  };

  NamedParams params = duo.net_s.named_parameters();
  for (auto& [name, p] : params) p->zero_grad();
  for (auto& [name, p] : duo.net_t.named_parameters()) p->zero_grad();
  duo.bank_t.latent.zero_grad();
  {
    Tape<double> t;
    t.backward(build(t));
  }
  auto rep = finite_diff_check(eval, params);
  INFO(rep.worst_param << " analytic " << rep.analytic << " numeric "
                       << rep.numeric);
  CHECK(rep.max_rel_error <= 1e-4);

  // The teacher never participates in the student tape.
  for (auto& [name, p] : duo.net_t.named_parameters())
    for (std::size_t i = 0; i < p->grad.size(); ++i) CHECK(p->grad[i] == 0.0);
  for (std::size_t i = 0; i < duo.bank_t.latent.grad.size(); ++i)
    CHECK(duo.bank_t.latent.grad[i] == 0.0);
}

TEST_CASE("kd_loss rejects stage-count mismatch") {
  auto duo = make_duo<double>(1, 95);
  auto teacher_trace = duo.run(duo.bank_t, duo.net_t);
  DistillConfig cfg;
  auto targets = make_distill_targets(teacher_trace, cfg);

  auto wrong = make_recovery_net<double>(2, ProxConfig{2}, duo.bank_s.shape, 96);
  Tape<double> t;
  Var h = duo.bank_s.realize_on(t);
  Var y = spc_forward(t, h, t.leaf(duo.scenes), duo.bank_s.shape);
  auto tr = unrolled_forward(t, wrong, h, y);
  CHECK_THROWS_AS(kd_loss(t, tr, targets, cfg), ConfigError);
}
