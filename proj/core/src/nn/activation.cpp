#include "igrec/nn/activation.hpp"

#include <cmath>

#include "igrec/common/error.hpp"

namespace igrec::nn {

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kTanh: return "tanh";
  }
  return "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "tanh") return Activation::kTanh;
  throw LoadError("unknown activation '" + std::string(name) + "'");
}

double sigmoid(double x) {
  // Split on sign so neither branch overflows exp().
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::MatrixXd activate(Activation activation, const Eigen::MatrixXd& pre) {
  switch (activation) {
    case Activation::kIdentity: return pre;
    case Activation::kRelu: return pre.cwiseMax(0.0);
    case Activation::kSigmoid: return pre.unaryExpr([](double v) { return sigmoid(v); });
    case Activation::kTanh: return pre.array().tanh().matrix();
  }
  return pre;
}

Eigen::MatrixXd activation_derivative(Activation activation, const Eigen::MatrixXd& pre,
                                      const Eigen::MatrixXd& post) {
  switch (activation) {
    case Activation::kIdentity: return Eigen::MatrixXd::Ones(pre.rows(), pre.cols());
    case Activation::kRelu:
      return pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::kSigmoid: return (post.array() * (1.0 - post.array())).matrix();
    case Activation::kTanh: return (1.0 - post.array().square()).matrix();
  }
  return Eigen::MatrixXd::Ones(pre.rows(), pre.cols());
}

}  // namespace igrec::nn
