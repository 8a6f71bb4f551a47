#include "spckd/distill.hpp"

#include <cmath>

namespace spckd {
namespace {

template <typename T>
Tensor<T> batch_row(const Tensor<T>& batched, std::size_t sample) {
  const Shape& s = batched.shape();
  if (s.size() != 2 || sample >= s[0])
    throw ShapeError("batch_row: sample " + std::to_string(sample) +
                     " out of range for " + shape_to_string(s));
  const std::size_t len = s[1];
  return Tensor<T>({len}, std::vector<T>(batched.data() + sample * len,
                                         batched.data() + (sample + 1) * len));
}

}  // namespace

template <typename T>
FeatureMatrix<T> extract_features(const TraceValues<T>& trace,
                                  FeatureKind kind, std::size_t sample) {
  FeatureMatrix<T> out;
  out.kind = kind;
  const auto& source =
      kind == FeatureKind::Sparse ? trace.sparse_codes : trace.x_stages;
  for (const Tensor<T>& stage : source)
    out.rows.push_back(batch_row(stage, sample));
  return out;
}

template <typename T>
Tensor<T> rbf_correlation(const FeatureMatrix<T>& f, T inv_two_sigma_sq) {
  if (inv_two_sigma_sq <= T(0))
    throw ConfigError("rbf_correlation: inv_two_sigma_sq must be positive");
  const std::size_t L = f.rows.size();
  Tensor<T> out({L, L});
  for (std::size_t i = 0; i < L; ++i) out[i * L + i] = T(1);
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = i + 1; j < L; ++j) {
      if (f.rows[i].size() != f.rows[j].size())
        throw ShapeError("rbf_correlation: feature rows differ in length");
      T d2 = 0;
      for (std::size_t t = 0; t < f.rows[i].size(); ++t) {
        const T d = f.rows[i][t] - f.rows[j][t];
        d2 += d * d;
      }
      const T m = std::exp(-inv_two_sigma_sq * d2);
      out[i * L + j] = m;
      out[j * L + i] = m;
    }
  return out;
}

template <typename T>
T cc_loss(const FeatureMatrix<T>& teacher, const FeatureMatrix<T>& student,
          const DistillConfig& config) {
  if (teacher.stage_count() != student.stage_count())
    throw ShapeError("cc_loss: stage counts differ, " +
                     std::to_string(teacher.stage_count()) + " vs " +
                     std::to_string(student.stage_count()));
  const T c = static_cast<T>(config.inv_two_sigma_sq);
  const Tensor<T> et = rbf_correlation(teacher, c);
  const Tensor<T> es = rbf_correlation(student, c);
  T acc = 0;
  for (std::size_t i = 0; i < et.size(); ++i) {
    const T d = et[i] - es[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

template <typename T>
T imitation_loss(const Tensor<T>& student_x, const Tensor<T>& teacher_x) {
  if (!student_x.same_shape(teacher_x))
    throw ShapeError("imitation_loss: shape mismatch " +
                     shape_to_string(student_x.shape()) + " vs " +
                     shape_to_string(teacher_x.shape()));
  T acc = 0;
  for (std::size_t i = 0; i < student_x.size(); ++i) {
    const T d = student_x[i] - teacher_x[i];
    acc += d * d;
  }
  return acc;
}

template <typename T>
DistillTargets<T> make_distill_targets(const TraceValues<T>& teacher_trace,
                                       const DistillConfig& config) {
  DistillTargets<T> targets;
  targets.stage_count = teacher_trace.x_stages.size();
  const std::size_t batch = teacher_trace.x_stages.back().shape()[0];
  for (std::size_t b = 0; b < batch; ++b) {
    const auto features =
        extract_features(teacher_trace, config.feature_kind, b);
    targets.eta.push_back(
        rbf_correlation(features, static_cast<T>(config.inv_two_sigma_sq)));
    targets.x_final.push_back(batch_row(teacher_trace.x_stages.back(), b));
  }
  return targets;
}

template <typename T>
Var kd_loss(Tape<T>& tape, const ReconstructionTrace<T>& student,
            const DistillTargets<T>& targets, const DistillConfig& config) {
  const std::size_t L = student.x_stages.size();
  if (L != targets.stage_count)
    throw ConfigError("kd_loss: student has " + std::to_string(L) +
                      " stages but the teacher targets have " +
                      std::to_string(targets.stage_count));
  const auto& source = config.feature_kind == FeatureKind::Sparse
                           ? student.sparse_codes
                           : student.x_stages;
  const std::size_t batch = tape.value(student.x_stages.back()).shape()[0];
  if (targets.eta.size() != batch)
    throw ShapeError("kd_loss: " + std::to_string(targets.eta.size()) +
                     " teacher targets for a batch of " +
                     std::to_string(batch));

  std::vector<Var> sample_losses;
  for (std::size_t b = 0; b < batch; ++b) {
    std::vector<Var> features;
    for (std::size_t k = 0; k < L; ++k)
      features.push_back(tape.slice_front(source[k], b));
    Var eta_s = tape.rbf_correlation(
        features, static_cast<T>(config.inv_two_sigma_sq));
    Var eta_diff = tape.sub(eta_s, tape.leaf(targets.eta[b]));
    Var cc = tape.sqrt(tape.dot(eta_diff, eta_diff));

    Var xs = tape.slice_front(student.x_stages.back(), b);
    Var im_diff = tape.sub(xs, tape.leaf(targets.x_final[b]));
    Var im = tape.dot(im_diff, im_diff);

    sample_losses.push_back(
        tape.add(tape.scale_const(cc, static_cast<T>(config.cc_weight)),
                 tape.scale_const(im, static_cast<T>(config.im_weight))));
  }
  return tape.scale_const(tape.add_n(sample_losses),
                          T(1) / static_cast<T>(batch));
}

template <typename T>
T kd_loss_value(const TraceValues<T>& student, const TraceValues<T>& teacher,
                const DistillConfig& config) {
  const std::size_t batch = student.x_stages.back().shape()[0];
  const std::size_t teacher_batch = teacher.x_stages.back().shape()[0];
  if (batch != teacher_batch)
    throw ShapeError("kd_loss_value: batch mismatch");
  T total = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    const auto ft = extract_features(teacher, config.feature_kind, b);
    const auto fs = extract_features(student, config.feature_kind, b);
    const T cc = cc_loss(ft, fs, config);
    const T im = imitation_loss(batch_row(student.x_stages.back(), b),
                                batch_row(teacher.x_stages.back(), b));
    total += static_cast<T>(config.cc_weight) * cc +
             static_cast<T>(config.im_weight) * im;
  }
  return total / static_cast<T>(batch);
}

#define SPCKD_INSTANTIATE_DISTILL(T)                                        \
  template FeatureMatrix<T> extract_features<T>(const TraceValues<T>&,      \
                                                FeatureKind, std::size_t);  \
  template Tensor<T> rbf_correlation<T>(const FeatureMatrix<T>&, T);        \
  template T cc_loss<T>(const FeatureMatrix<T>&, const FeatureMatrix<T>&,   \
                        const DistillConfig&);                              \
  template T imitation_loss<T>(const Tensor<T>&, const Tensor<T>&);         \
  template DistillTargets<T> make_distill_targets<T>(const TraceValues<T>&, \
                                                     const DistillConfig&); \
  template Var kd_loss<T>(Tape<T>&, const ReconstructionTrace<T>&,          \
                          const DistillTargets<T>&, const DistillConfig&);  \
  template T kd_loss_value<T>(const TraceValues<T>&, const TraceValues<T>&, \
                              const DistillConfig&);

SPCKD_INSTANTIATE_DISTILL(float)
SPCKD_INSTANTIATE_DISTILL(double)

#undef SPCKD_INSTANTIATE_DISTILL

}  // namespace spckd
