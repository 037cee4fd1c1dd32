#pragma once

#include <string>
#include <string_view>

#include <Eigen/Core>

namespace igrec::nn {

enum class Activation { kIdentity, kRelu, kSigmoid, kTanh };

std::string_view to_string(Activation activation);
Activation activation_from_string(std::string_view name);

Eigen::MatrixXd activate(Activation activation, const Eigen::MatrixXd& pre);

/// Elementwise d(activation)/d(pre), given both the pre-activation and its output.
/// ReLU uses subgradient 0 at exactly 0.
Eigen::MatrixXd activation_derivative(Activation activation, const Eigen::MatrixXd& pre,
                                      const Eigen::MatrixXd& post);

double sigmoid(double x);

}  // namespace igrec::nn
