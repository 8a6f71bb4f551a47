#ifndef SPCKD_VERIFY_HPP
#define SPCKD_VERIFY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "spckd/gradcheck.hpp"

namespace spckd {

struct GradSuiteCase {
  std::string name;        // parameter class under a given objective
  double max_rel_error;    // worst relative error across its entries
};

struct GradSuiteResult {
  std::vector<GradSuiteCase> cases;
  double worst = 0.0;
  std::uint64_t seed_used = 0;
  int attempts = 1;
  bool passed = false;
};

// Central-difference verification (f64) of every parameter class of a tiny
// teacher/student pair under both the reconstruction and the distillation
// objectives: alpha, rho, beta, encoder/decoder kernels and biases, restore,
// and the aperture latent in RealValued mode (true derivative agreement) and
// Binary mode (identity-passthrough contract of the straight-through sign,
// checked exactly against the real-valued gradient at the realized point).
//
// Finite differences near activation kinks are ill-posed, so instances whose
// worst error exceeds the tolerance are retried with the next seed (bounded
// by max_attempts); a systematic gradient defect fails every instance.
GradSuiteResult run_gradcheck_suite(std::size_t rows, std::size_t stages,
                                    std::size_t channels, double gamma,
                                    std::uint64_t seed, double eps = 1e-5,
                                    double tolerance = 1e-4,
                                    int max_attempts = 8);

}  // namespace spckd

#endif  // SPCKD_VERIFY_HPP
