#include "spckd/training.hpp"

#include <cmath>
#include <sstream>

#include "spckd/metrics.hpp"
#include "spckd/random.hpp"

namespace spckd {

// ----------------------------------------------------------------- optimizer

template <typename T>
OptimizerState<T>::OptimizerState(OptimKind kind, T learning_rate)
    : kind_(kind), lr_(learning_rate) {}

template <typename T>
void OptimizerState<T>::attach(
    const std::vector<std::pair<std::string, Parameter<T>*>>& ps) {
  slots_.clear();
  for (const auto& [name, p] : ps) {
    Slot slot;
    slot.param = p;
    if (kind_ == OptimKind::Adam) {
      slot.m = Tensor<T>(p->value.shape());
      slot.v = Tensor<T>(p->value.shape());
    }
    slots_.push_back(std::move(slot));
  }
}

template <typename T>
void OptimizerState<T>::step() {
  bool armed = false;
  for (const Slot& s : slots_) armed |= s.param->saw_backward;
  if (!armed)
    throw UsageError("optimizer step before any backward pass");
  ++steps_;
  const T bc1 = T(1) - static_cast<T>(std::pow(beta1_, steps_));
  const T bc2 = T(1) - static_cast<T>(std::pow(beta2_, steps_));
  for (Slot& s : slots_) {
    if (!s.param->requires_grad) continue;
    Tensor<T>& g = s.param->grad;
    bool any = false;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g[i] != T(0)) {
        any = true;
        break;
      }
    if (!any) continue;  // a step only moves parameters that got gradient
    Tensor<T>& p = s.param->value;
    if (kind_ == OptimKind::SGD) {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr_ * g[i];
    } else {
      for (std::size_t i = 0; i < p.size(); ++i) {
        s.m[i] = beta1_ * s.m[i] + (T(1) - beta1_) * g[i];
        s.v[i] = beta2_ * s.v[i] + (T(1) - beta2_) * g[i] * g[i];
        const T mhat = s.m[i] / bc1;
        const T vhat = s.v[i] / bc2;
        p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }
  zero_grad();
}

template <typename T>
void OptimizerState<T>::zero_grad() {
  for (Slot& s : slots_) s.param->zero_grad();
}

template class OptimizerState<float>;
template class OptimizerState<double>;

// ------------------------------------------------------------ training loops

namespace {

struct Batcher {
  std::vector<std::size_t> order;
  std::size_t batch_size;

  Batcher(std::size_t n, std::size_t batch, Rng& rng) : batch_size(batch) {
    order.resize(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
  }
  std::size_t batches() const {
    return (order.size() + batch_size - 1) / batch_size;
  }
  std::pair<std::size_t, std::size_t> range(std::size_t b) const {
    const std::size_t first = b * batch_size;
    return {first, std::min(batch_size, order.size() - first)};
  }
};

SpcSystem<float> system_from_config(const ExperimentConfig& c) {
  return make_system<float>(c.sensing.gamma, c.data.image_rows,
                            c.data.image_cols, c.data.bands, c.sensing.mode,
                            c.network.stages, c.network.channels,
                            c.train.seed);
}

// Measurements for one batch, with optional AWGN added as a constant.
Var measure(Tape<float>& tape, Var realized, Var scenes,
            const SensingShape& shape, const NoiseSpec& noise,
            std::uint64_t nonce) {
  Var y = spc_forward(tape, realized, scenes, shape);
  if (noise.kind == NoiseKind::None) return y;
  NoiseSpec spec = noise;
  spec.seed = noise.seed + 0x9e3779b97f4a7c15ull * (nonce + 1);
  const Tensor<float>& clean = tape.value(y);
  Tensor<float> delta = apply_noise(clean, shape.snapshots, spec);
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] -= clean[i];
  return tape.add(y, tape.leaf(delta));
}

double validation_psnr(SpcSystem<float>& sys, const Dataset& val,
                       std::size_t batch_size) {
  if (val.empty()) return 0.0;
  std::vector<std::size_t> order(val.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  double total = 0.0;
  for (std::size_t first = 0; first < order.size(); first += batch_size) {
    const std::size_t count = std::min(batch_size, order.size() - first);
    Tensor<float> scenes = val.batch(order, first, count);
    TraceValues<float> trace = sys.run(scenes);
    const std::size_t len = scenes.shape()[1];
    for (std::size_t b = 0; b < count; ++b) {
      Tensor<float> got({len}, std::vector<float>(
                                   trace.x_stages.back().data() + b * len,
                                   trace.x_stages.back().data() + (b + 1) * len));
      Tensor<float> want({len}, std::vector<float>(scenes.data() + b * len,
                                                   scenes.data() + (b + 1) * len));
      total += psnr(got, want);
    }
  }
  return total / static_cast<double>(val.size());
}

std::string history_to_json(const std::vector<EpochRecord>& history) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (i) os << ",";
    os << "{\"epoch\":" << history[i].epoch
       << ",\"train_loss\":" << history[i].train_loss
       << ",\"val_psnr\":" << history[i].val_psnr << "}";
  }
  os << "]";
  return os.str();
}

struct BestTracker {
  double best_score = -1e300;
  std::uint32_t best_epoch = 0;
  std::vector<Tensor<float>> snapshot;

  void consider(double score, std::uint32_t epoch, SpcSystem<float>& sys) {
    if (!snapshot.empty() && score <= best_score) return;
    best_score = score;
    best_epoch = epoch;
    snapshot.clear();
    for (auto& [name, p] : sys.named_parameters()) snapshot.push_back(p->value);
  }
  void restore(SpcSystem<float>& sys) const {
    auto params = sys.named_parameters();
    for (std::size_t i = 0; i < params.size(); ++i)
      params[i].second->value = snapshot[i];
  }
};

}  // namespace

TrainOutput train_e2e(const ExperimentConfig& config, const Dataset& train,
                      const Dataset& val) {
  if (config.train.role == TrainRole::StudentKD)
    throw ConfigError("train_e2e expects the Teacher or Baseline role");
  if (train.empty()) throw ConfigError("train_e2e: empty training set");
  validate_config(config);

  SpcSystem<float> sys = system_from_config(config);
  OptimizerState<float> opt(config.train.optimizer,
                            static_cast<float>(config.train.learning_rate));
  opt.attach(sys.named_parameters());

  TrainOutput out;
  BestTracker best;
  const std::size_t scene = sys.bank.shape.scene_size();
  std::uint64_t nonce = 0;
  for (std::size_t epoch = 0; epoch < config.train.epochs; ++epoch) {
    Rng shuffle_rng(config.train.seed ^ (0xb5ad4eceda1ce2a9ull + epoch));
    Batcher batcher(train.size(), config.train.batch_size, shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batcher.batches(); ++b) {
      const auto [first, count] = batcher.range(b);
      Tensor<float> scenes = train.batch(batcher.order, first, count);
      Tape<float> tape;
      Var h = sys.bank.realize_on(tape);
      Var y = measure(tape, h, tape.leaf(scenes), sys.bank.shape,
                      config.sensing.noise, nonce++);
      auto trace = unrolled_forward(tape, sys.net, h, y);
      Var diff = tape.sub(trace.reconstruction(), tape.leaf(scenes));
      Var loss = tape.scale_const(
          tape.dot(diff, diff),
          1.0f / static_cast<float>(count * scene));
      const double loss_value = tape.value(loss).item();
      tape.backward(loss);
      opt.step();
      out.step_losses.push_back(loss_value);
      epoch_loss += loss_value * static_cast<double>(count);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(train.size());
    rec.val_psnr = validation_psnr(sys, val, config.train.batch_size);
    out.history.push_back(rec);
    const double score = val.empty() ? -rec.train_loss : rec.val_psnr;
    best.consider(score, static_cast<std::uint32_t>(epoch), sys);
  }
  best.restore(sys);
  out.best_epoch = best.best_epoch;
  out.checkpoint = make_checkpoint(config, sys, best.best_epoch,
                                   history_to_json(out.history));
  return out;
}

TrainOutput train_kd(const ExperimentConfig& config, const Dataset& train,
                     const Dataset& val, const Checkpoint& teacher) {
  if (config.train.role != TrainRole::StudentKD)
    throw ConfigError("train_kd expects the Student-KD role");
  if (train.empty()) throw ConfigError("train_kd: empty training set");
  if (config.sensing.mode != ApertureMode::Binary)
    throw ConfigError("train_kd: the student must use binary apertures");
  if (teacher.config.network.stages != config.network.stages)
    throw ConfigError(
        "train_kd: teacher has " +
        std::to_string(teacher.config.network.stages) +
        " stages, student has " + std::to_string(config.network.stages) +
        " (the correlation loss needs equal stage counts)");

  SpcSystem<float> teacher_sys = system_from_checkpoint(teacher);
  for (auto& [name, p] : teacher_sys.named_parameters())
    p->requires_grad = false;  // frozen

  SpcSystem<float> sys = system_from_config(config);
  OptimizerState<float> opt(config.train.optimizer,
                            static_cast<float>(config.train.learning_rate));
  opt.attach(sys.named_parameters());

  // The teacher is frozen, so its knowledge per training sample is fixed;
  // compute the correlation matrices and final reconstructions once.
  std::vector<Tensor<float>> teacher_eta(train.size());
  std::vector<Tensor<float>> teacher_x(train.size());
  {
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t first = 0; first < train.size();
         first += config.train.batch_size) {
      const std::size_t count =
          std::min(config.train.batch_size, train.size() - first);
      TraceValues<float> tr =
          teacher_sys.run(train.batch(order, first, count));
      DistillTargets<float> targets = make_distill_targets(tr, config.distill);
      for (std::size_t b = 0; b < count; ++b) {
        teacher_eta[first + b] = std::move(targets.eta[b]);
        teacher_x[first + b] = std::move(targets.x_final[b]);
      }
    }
  }

  ExperimentConfig echo = config;
  echo.train.teacher_gamma = teacher.config.sensing.gamma;

  TrainOutput out;
  BestTracker best;
  for (std::size_t epoch = 0; epoch < config.train.epochs; ++epoch) {
    Rng shuffle_rng(config.train.seed ^ (0xb5ad4eceda1ce2a9ull + epoch));
    Batcher batcher(train.size(), config.train.batch_size, shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batcher.batches(); ++b) {
      const auto [first, count] = batcher.range(b);
      Tensor<float> scenes = train.batch(batcher.order, first, count);
      DistillTargets<float> targets;
      targets.stage_count = config.network.stages;
      for (std::size_t i = 0; i < count; ++i) {
        targets.eta.push_back(teacher_eta[batcher.order[first + i]]);
        targets.x_final.push_back(teacher_x[batcher.order[first + i]]);
      }
      Tape<float> tape;
      Var h = sys.bank.realize_on(tape);
      Var y = spc_forward(tape, h, tape.leaf(scenes), sys.bank.shape);
      auto trace = unrolled_forward(tape, sys.net, h, y);
      Var loss = kd_loss(tape, trace, targets, config.distill);
      const double loss_value = tape.value(loss).item();
      tape.backward(loss);
      opt.step();
      out.step_losses.push_back(loss_value);
      epoch_loss += loss_value * static_cast<double>(count);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(train.size());
    rec.val_psnr = validation_psnr(sys, val, config.train.batch_size);
    out.history.push_back(rec);
    const double score = val.empty() ? -rec.train_loss : rec.val_psnr;
    best.consider(score, static_cast<std::uint32_t>(epoch), sys);
  }
  best.restore(sys);
  out.best_epoch = best.best_epoch;
  out.checkpoint = make_checkpoint(echo, sys, best.best_epoch,
                                   history_to_json(out.history));
  return out;
}

}  // namespace spckd
