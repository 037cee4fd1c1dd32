#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "igrec/nn/params.hpp"

namespace igrec::nn {

enum class OptimizerKind { kSgd, kAdam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double momentum = 0.0;  // sgd only
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First-order optimizer over a stable list of parameter blocks.
///
/// sgd:  v = momentum * v + g;  p -= lr * v   (momentum 0 gives p -= lr * g)
/// adam: bias-corrected first/second moments, p -= lr * m_hat / (sqrt(v_hat) + eps)
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  const OptimizerConfig& config() const { return config_; }
  std::size_t steps_taken() const { return steps_; }

  /// Applies one update. Gradients are checked first: any non-finite entry throws
  /// TrainingError naming the block, and no parameter is modified.
  void step(std::span<const ParamBlock> blocks);

 private:
  OptimizerConfig config_;
  std::size_t steps_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

}  // namespace igrec::nn
