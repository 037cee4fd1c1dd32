#include "igrec/nn/mlp.hpp"

#include <cmath>

#include "igrec/common/error.hpp"

namespace igrec::nn {

DenseLayer DenseLayer::init(std::size_t in, std::size_t out, Activation activation, Rng& rng) {
  if (in == 0 || out == 0) throw ShapeError("dense layer dimensions must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  DenseLayer layer;
  layer.activation = activation;
  layer.weights.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  layer.bias.resize(static_cast<Eigen::Index>(out));
  for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
      layer.weights(r, c) = rng.uniform(-bound, bound);
  for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = rng.uniform(-bound, bound);
  return layer;
}

Eigen::MatrixXd DenseLayer::pre_activation(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd z = weights * x;
  z.colwise() += bias;
  return z;
}

Eigen::MatrixXd DenseLayer::forward(const Eigen::MatrixXd& x) const {
  return activate(activation, pre_activation(x));
}

void MlpGradients::set_zero_like(const Mlp& mlp) {
  layers.resize(mlp.layers().size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = mlp.layers()[i];
    layers[i].weights = Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols());
    layers[i].bias = Eigen::VectorXd::Zero(layer.bias.size());
  }
  input.resize(0, 0);
}

MlpGradients& MlpGradients::operator+=(const MlpGradients& other) {
  if (layers.size() != other.layers.size()) throw ShapeError("gradient layer count mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].weights += other.layers[i].weights;
    layers[i].bias += other.layers[i].bias;
  }
  return *this;
}

void ForwardCache::clear() {
  inputs.clear();
  pre.clear();
  post.clear();
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& layer = layers_[i];
    if (layer.bias.size() != layer.weights.rows()) {
      throw ShapeError("layer " + std::to_string(i) + ": bias length " +
                       std::to_string(layer.bias.size()) + " != out dim " +
                       std::to_string(layer.weights.rows()));
    }
    if (i > 0 && layers_[i - 1].out_dim() != layer.in_dim()) {
      throw ShapeError("layer " + std::to_string(i) + " expects " + std::to_string(layer.in_dim()) +
                       " inputs but layer " + std::to_string(i - 1) + " produces " +
                       std::to_string(layers_[i - 1].out_dim()));
    }
  }
}

Mlp Mlp::create(std::span<const std::size_t> dims, Activation hidden, Activation output, Rng& rng) {
  if (dims.size() < 2) throw ShapeError("an MLP needs at least input and output dimensions");
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const bool last = i + 2 == dims.size();
    layers.push_back(DenseLayer::init(dims[i], dims[i + 1], last ? output : hidden, rng));
  }
  return Mlp(std::move(layers));
}

std::size_t Mlp::in_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
std::size_t Mlp::out_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }

std::size_t Mlp::parameter_count() const {
  std::size_t count = 0;
  for (const auto& layer : layers_) count += layer.weights.size() + layer.bias.size();
  return count;
}

void Mlp::check_input(Eigen::Index rows) const {
  if (layers_.empty()) throw StateError("forward on an empty MLP");
  if (static_cast<std::size_t>(rows) != in_dim()) {
    throw ShapeError("MLP input has " + std::to_string(rows) + " rows, expected " +
                     std::to_string(in_dim()));
  }
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  check_input(x.size());
  Eigen::MatrixXd h = x;
  for (const auto& layer : layers_) h = layer.forward(h);
  return h.col(0);
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& x) const {
  check_input(x.rows());
  Eigen::MatrixXd h = x;
  for (const auto& layer : layers_) h = layer.forward(h);
  return h;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& x, ForwardCache& cache) const {
  check_input(x.rows());
  cache.clear();
  Eigen::MatrixXd h = x;
  for (const auto& layer : layers_) {
    cache.inputs.push_back(h);
    cache.pre.push_back(layer.pre_activation(h));
    cache.post.push_back(activate(layer.activation, cache.pre.back()));
    h = cache.post.back();
  }
  return h;
}

MlpGradients Mlp::backward(const ForwardCache& cache, const Eigen::MatrixXd& upstream) const {
  if (cache.empty()) throw StateError("backward called before a training forward pass");
  if (cache.inputs.size() != layers_.size()) throw StateError("forward cache belongs to another MLP");
  const auto& out = cache.post.back();
  if (upstream.rows() != out.rows() || upstream.cols() != out.cols()) {
    throw ShapeError("upstream gradient is " + std::to_string(upstream.rows()) + "x" +
                     std::to_string(upstream.cols()) + ", output is " + std::to_string(out.rows()) +
                     "x" + std::to_string(out.cols()));
  }
  MlpGradients grads;
  grads.layers.resize(layers_.size());
  Eigen::MatrixXd delta = upstream;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const auto& layer = layers_[i];
    const Eigen::MatrixXd dz =
        delta.cwiseProduct(activation_derivative(layer.activation, cache.pre[i], cache.post[i]));
    grads.layers[i].weights = dz * cache.inputs[i].transpose();
    grads.layers[i].bias = dz.rowwise().sum();
    delta = layer.weights.transpose() * dz;
  }
  grads.input = std::move(delta);
  return grads;
}

void Mlp::append_blocks(const std::string& prefix, const MlpGradients& grads, ParamBlocks& blocks) {
  if (grads.layers.size() != layers_.size()) throw ShapeError(prefix + ": gradient layer count mismatch");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string base = prefix + "." + std::to_string(i);
    blocks.push_back(make_block(base + ".weights", layers_[i].weights, grads.layers[i].weights));
    blocks.push_back(make_block(base + ".bias", layers_[i].bias, grads.layers[i].bias));
  }
}

double Mlp::squared_norm() const {
  double total = 0.0;
  for (const auto& layer : layers_) total += layer.weights.squaredNorm() + layer.bias.squaredNorm();
  return total;
}

bool Mlp::all_finite() const {
  for (const auto& layer : layers_) {
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

}  // namespace igrec::nn
