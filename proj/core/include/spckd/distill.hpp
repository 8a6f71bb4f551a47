#ifndef SPCKD_DISTILL_HPP
#define SPCKD_DISTILL_HPP

#include <cstdint>
#include <vector>

#include "spckd/recovery.hpp"
#include "spckd/tape.hpp"

namespace spckd {

// Which per-stage features carry the knowledge: the soft-threshold outputs
// f^k (Sparse) or the stage reconstructions x^k (NonSparse).
enum class FeatureKind : std::uint8_t { Sparse = 0, NonSparse = 1 };

struct DistillConfig {
  double inv_two_sigma_sq = 1e-6;  // 1/(2 sigma^2) of the RBF kernel
  FeatureKind feature_kind = FeatureKind::Sparse;
  double cc_weight = 1.0;
  double im_weight = 1.0;
};

// Stage features of one sample: exactly L rows of equal length.
template <typename T>
struct FeatureMatrix {
  std::vector<Tensor<T>> rows;
  FeatureKind kind = FeatureKind::Sparse;

  std::size_t stage_count() const { return rows.size(); }
};

// Features of sample `sample` from a detached batched trace.
template <typename T>
FeatureMatrix<T> extract_features(const TraceValues<T>& trace,
                                  FeatureKind kind, std::size_t sample = 0);

// eta(F): [L,L] matrix with entries exp(-c ||f_i - f_j||^2), unit diagonal.
template <typename T>
Tensor<T> rbf_correlation(const FeatureMatrix<T>& f, T inv_two_sigma_sq);

// || eta(F_t) - eta(F_s) ||_F. Teacher and student feature lengths may
// differ; only the stage counts must match.
template <typename T>
T cc_loss(const FeatureMatrix<T>& teacher, const FeatureMatrix<T>& student,
          const DistillConfig& config);

// || x_s - x_t ||^2 of the final reconstructions.
template <typename T>
T imitation_loss(const Tensor<T>& student_x, const Tensor<T>& teacher_x);

// Per-sample knowledge extracted once from a frozen teacher trace: the
// teacher's correlation matrix and final reconstruction. The KD objective
// needs nothing else from the teacher.
template <typename T>
struct DistillTargets {
  std::vector<Tensor<T>> eta;      // [L,L] per sample
  std::vector<Tensor<T>> x_final;  // [M*N*J] per sample
  std::size_t stage_count = 0;
};

template <typename T>
DistillTargets<T> make_distill_targets(const TraceValues<T>& teacher_trace,
                                       const DistillConfig& config);

// Differentiable KD objective for a batched student trace:
// mean over samples of cc_w * ||eta_t - eta_s||_F + im_w * ||x_s - x_t||^2.
template <typename T>
Var kd_loss(Tape<T>& tape, const ReconstructionTrace<T>& student,
            const DistillTargets<T>& targets, const DistillConfig& config);

// Detached KD loss between two traces (teacher side constant).
template <typename T>
T kd_loss_value(const TraceValues<T>& student, const TraceValues<T>& teacher,
                const DistillConfig& config);

}  // namespace spckd

#endif  // SPCKD_DISTILL_HPP
