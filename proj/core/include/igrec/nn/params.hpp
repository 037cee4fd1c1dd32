#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "igrec/common/error.hpp"

namespace igrec::nn {

/// A contiguous run of trainable values paired with its gradient.
///
/// Optimizers and the finite-difference checker operate on lists of blocks so
/// that MLPs, recurrent cells and embedding tables share one update path.
/// Block order must be stable between calls: optimizer state is keyed by it.
struct ParamBlock {
  std::string name;
  double* value = nullptr;
  const double* grad = nullptr;
  std::size_t size = 0;
};

inline ParamBlock make_block(std::string name, Eigen::MatrixXd& value, const Eigen::MatrixXd& grad) {
  if (value.rows() != grad.rows() || value.cols() != grad.cols())
    throw ShapeError(name + ": gradient shape differs from parameter shape");
  return {std::move(name), value.data(), grad.data(), static_cast<std::size_t>(value.size())};
}

inline ParamBlock make_block(std::string name, Eigen::VectorXd& value, const Eigen::VectorXd& grad) {
  if (value.size() != grad.size()) throw ShapeError(name + ": gradient length differs from parameter length");
  return {std::move(name), value.data(), grad.data(), static_cast<std::size_t>(value.size())};
}

inline ParamBlock make_block(std::string name, double& value, const double& grad) {
  return {std::move(name), &value, &grad, 1};
}

using ParamBlocks = std::vector<ParamBlock>;

}  // namespace igrec::nn
