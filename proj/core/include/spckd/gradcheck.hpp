#ifndef SPCKD_GRADCHECK_HPP
#define SPCKD_GRADCHECK_HPP

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "spckd/tape.hpp"

namespace spckd {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

using NamedParams = std::vector<std::pair<std::string, Parameter<double>*>>;

// Central-difference gradient oracle. `f` recomputes the scalar loss from the
// parameters' current values; every grad field must already hold the analytic
// gradient of f at the current point. `f` must be deterministic, otherwise
// the result is meaningless (caller contract). Relative errors use
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckReport finite_diff_check(const std::function<double()>& f,
                                  const NamedParams& params,
                                  double eps = 1e-5);

}  // namespace spckd

#endif  // SPCKD_GRADCHECK_HPP
