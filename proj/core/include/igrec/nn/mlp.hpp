#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "igrec/common/rng.hpp"
#include "igrec/nn/activation.hpp"
#include "igrec/nn/params.hpp"

namespace igrec::nn {

class Mlp;

/// Fully connected layer: y = act(W x + b). Batched inputs are column-stacked.
struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
  Activation activation = Activation::kIdentity;

  /// Weights and bias uniform in [-1/sqrt(in), 1/sqrt(in)].
  static DenseLayer init(std::size_t in, std::size_t out, Activation activation, Rng& rng);

  std::size_t in_dim() const { return static_cast<std::size_t>(weights.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weights.rows()); }

  Eigen::MatrixXd pre_activation(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
};

struct LayerGradients {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
};

struct MlpGradients {
  std::vector<LayerGradients> layers;
  Eigen::MatrixXd input;  // dL/dx, same shape as the forward input

  void set_zero_like(const Mlp& mlp);
  MlpGradients& operator+=(const MlpGradients& other);
};

/// Intermediates recorded by a training-mode forward pass.
///
/// Kept outside the network so a frozen Mlp can serve concurrent forwards.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer
  std::vector<Eigen::MatrixXd> pre;     // pre-activations
  std::vector<Eigen::MatrixXd> post;    // activations

  bool empty() const { return inputs.empty(); }
  void clear();
};

class Mlp {
 public:
  Mlp() = default;
  /// Throws ShapeError if consecutive layer dimensions do not chain.
  explicit Mlp(std::vector<DenseLayer> layers);

  /// dims = {in, h1, ..., out}; hidden layers use `hidden`, the last layer `output`.
  static Mlp create(std::span<const std::size_t> dims, Activation hidden, Activation output,
                    Rng& rng);

  bool empty() const { return layers_.empty(); }
  std::size_t in_dim() const;
  std::size_t out_dim() const;
  std::size_t parameter_count() const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const;
  /// Training forward: records intermediates into `cache` (overwriting it).
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x, ForwardCache& cache) const;

  /// Backpropagates dL/d(output) through the cached pass.
  /// Throws StateError when the cache is empty, ShapeError on mismatched upstream.
  MlpGradients backward(const ForwardCache& cache, const Eigen::MatrixXd& upstream) const;

  /// Blocks named "<prefix>.<i>.weights" / ".bias" in layer order, weights before bias.
  void append_blocks(const std::string& prefix, const MlpGradients& grads, ParamBlocks& blocks);

  double squared_norm() const;
  bool all_finite() const;

 private:
  void check_input(Eigen::Index rows) const;

  std::vector<DenseLayer> layers_;
};

}  // namespace igrec::nn
