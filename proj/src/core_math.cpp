#include "sentinel/core_math.hpp"

#include <cmath>
#include <string>

namespace sentinel {

double gradient_check(const std::function<double()>& loss, const ParamRefs<double>& params,
                      const ParamRefs<double>& analytic, double epsilon) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-3)) {
    throw UsageError("gradient_check: epsilon " + std::to_string(epsilon) +
                     " outside [1e-6, 1e-3]");
  }
  check_same_shapes(params, analytic, "gradient_check");
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<double>& p = *params[k];
    const Tensor<double>& g = *analytic[k];
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      double& slot = p.data()[i];
      const double saved = slot;
      slot = saved + epsilon;
      const double up = loss();
      slot = saved - epsilon;
      const double down = loss();
      slot = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("gradient_check: non-finite loss at parameter " + std::to_string(k) +
                           " entry " + std::to_string(i));
      }
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = g.data()[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace sentinel
