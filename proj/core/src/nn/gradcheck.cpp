#include "igrec/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace igrec::nn {

GradCheckResult check_gradients(std::span<const ParamBlock> blocks, const std::function<double()>& loss,
                                double step, double floor) {
  GradCheckResult result;
  for (const auto& block : blocks) {
    for (std::size_t i = 0; i < block.size; ++i) {
      const double original = block.value[i];
      block.value[i] = original + step;
      const double plus = loss();
      block.value[i] = original - step;
      const double minus = loss();
      block.value[i] = original;

      const double numeric = (plus - minus) / (2.0 * step);
      const double analytic = block.grad[i];
      const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
      const double error = std::abs(analytic - numeric) / scale;
      ++result.checked;
      if (error > result.max_relative_error || !std::isfinite(error)) {
        result.max_relative_error = std::isfinite(error) ? error : INFINITY;
        result.worst_parameter = block.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace igrec::nn
