#ifndef SPCKD_TRAINING_HPP
#define SPCKD_TRAINING_HPP

#include <string>
#include <utility>
#include <vector>

#include "spckd/checkpoint.hpp"
#include "spckd/config.hpp"
#include "spckd/data.hpp"
#include "spckd/distill.hpp"

namespace spckd {

// SGD or Adam over an attached parameter set. step() applies the update,
// zeroes the gradients and rearms; calling it before any backward pass is a
// usage error. Parameters whose gradient is identically zero are skipped, so
// a step only ever touches parameters that received gradient.
template <typename T>
class OptimizerState {
 public:
  OptimizerState(OptimKind kind, T learning_rate);

  void attach(const std::vector<std::pair<std::string, Parameter<T>*>>& ps);
  void step();
  void zero_grad();
  std::size_t step_count() const { return steps_; }

 private:
  struct Slot {
    Parameter<T>* param;
    Tensor<T> m;
    Tensor<T> v;
  };

  OptimKind kind_;
  T lr_;
  T beta1_ = T(0.9);
  T beta2_ = T(0.999);
  T eps_ = T(1e-8);
  std::size_t steps_ = 0;
  std::vector<Slot> slots_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // task MSE for E2E roles, KD objective otherwise
  double val_psnr = 0.0;
};

struct TrainOutput {
  Checkpoint checkpoint;  // best-validation snapshot
  std::vector<EpochRecord> history;
  std::vector<double> step_losses;  // one entry per optimizer step
  std::size_t best_epoch = 0;
};

// End-to-end training for Teacher and Baseline roles: minimizes the mean
// squared reconstruction error jointly over the network and the aperture
// latent. Binary mode routes the latent through the straight-through sign.
TrainOutput train_e2e(const ExperimentConfig& config, const Dataset& train,
                      const Dataset& val);

// Knowledge distillation for the Student-KD role: the teacher is loaded
// frozen, its per-sample targets are computed once, and the student
// minimizes the KD objective. The student never sees the ground truth.
TrainOutput train_kd(const ExperimentConfig& config, const Dataset& train,
                     const Dataset& val, const Checkpoint& teacher);

extern template class OptimizerState<float>;
extern template class OptimizerState<double>;

}  // namespace spckd

#endif  // SPCKD_TRAINING_HPP
