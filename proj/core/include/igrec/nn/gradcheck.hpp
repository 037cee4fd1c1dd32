#pragma once

#include <functional>
#include <span>
#include <string>

#include "igrec/nn/params.hpp"

namespace igrec::nn {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;  // "<block>[index]"
  std::size_t checked = 0;
};

/// Compares the analytic gradients held in `blocks` against central differences
/// of `loss`, perturbing every parameter by +/- `step`.
///
/// relative error = |analytic - numeric| / max(|analytic|, |numeric|, floor)
/// The floor keeps exactly-zero gradients (dead ReLUs) from dividing by zero.
GradCheckResult check_gradients(std::span<const ParamBlock> blocks, const std::function<double()>& loss,
                                double step = 1e-5, double floor = 1e-6);

}  // namespace igrec::nn
