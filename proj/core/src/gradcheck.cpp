#include "spckd/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace spckd {

GradCheckReport finite_diff_check(const std::function<double()>& f,
                                  const NamedParams& params, double eps) {
  GradCheckReport report;
  for (const auto& [name, p] : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + eps;
      const double fp = f();
      p->value[i] = saved - eps;
      const double fm = f();
      p->value[i] = saved;

      const double numeric = (fp - fm) / (2.0 * eps);
      const double analytic = p->grad[i];
      const double denom =
          std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = name;
        report.worst_index = i;
        report.analytic = analytic;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace spckd
