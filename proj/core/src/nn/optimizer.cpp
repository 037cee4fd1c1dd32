#include "igrec/nn/optimizer.hpp"

#include <cmath>
#include <string>

#include "igrec/common/error.hpp"

namespace igrec::nn {

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kSgd ? "sgd" : "adam";
}

OptimizerKind optimizer_kind_from_string(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw ContractError("unknown optimizer '" + std::string(name) + "'");
}

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {
  if (!(config_.learning_rate >= 0.0) || !std::isfinite(config_.learning_rate)) {
    throw ContractError("learning rate must be a finite non-negative number");
  }
}

void Optimizer::step(std::span<const ParamBlock> blocks) {
  for (const auto& block : blocks) {
    for (std::size_t i = 0; i < block.size; ++i) {
      if (!std::isfinite(block.grad[i])) {
        throw TrainingError("non-finite gradient in " + block.name + " at index " +
                            std::to_string(i));
      }
    }
  }
  if (first_.empty()) {
    first_.resize(blocks.size());
    second_.resize(blocks.size());
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      first_[b].assign(blocks[b].size, 0.0);
      if (config_.kind == OptimizerKind::kAdam) second_[b].assign(blocks[b].size, 0.0);
    }
  } else if (first_.size() != blocks.size()) {
    throw ContractError("optimizer called with a different parameter layout");
  }

  ++steps_;
  const double lr = config_.learning_rate;
  if (config_.kind == OptimizerKind::kSgd) {
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const auto& block = blocks[b];
      auto& velocity = first_[b];
      if (velocity.size() != block.size) throw ContractError(block.name + ": block size changed");
      for (std::size_t i = 0; i < block.size; ++i) {
        if (config_.momentum == 0.0) {
          block.value[i] -= lr * block.grad[i];
        } else {
          velocity[i] = config_.momentum * velocity[i] + block.grad[i];
          block.value[i] -= lr * velocity[i];
        }
      }
    }
    return;
  }

  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& block = blocks[b];
    auto& m = first_[b];
    auto& v = second_[b];
    if (m.size() != block.size) throw ContractError(block.name + ": block size changed");
    for (std::size_t i = 0; i < block.size; ++i) {
      const double g = block.grad[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      block.value[i] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

}  // namespace igrec::nn
