#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "igrec/nn/mlp.hpp"
#include "igrec/nn/optimizer.hpp"

namespace igrec::prep {

/// Dense encoder/decoder pair. The decoder mirrors the encoder's widths.
struct AutoencoderConfig {
  std::vector<std::size_t> hidden_dims{16};  // encoder widths between input and latent
  std::size_t latent_dim = 8;
  nn::Activation hidden_activation = nn::Activation::kRelu;
  nn::Activation latent_activation = nn::Activation::kIdentity;
  nn::Activation output_activation = nn::Activation::kIdentity;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  nn::OptimizerConfig optimizer{nn::OptimizerKind::kAdam, 5e-3};
  std::uint64_t seed = 0;

  /// 2048 -> 1024 -> 512 -> 128 -> 64 with ReLU.
  static AutoencoderConfig full_scale();
};

class Autoencoder {
 public:
  Autoencoder() = default;
  Autoencoder(nn::Mlp encoder, nn::Mlp decoder);

  static Autoencoder create(std::size_t input_dim, const AutoencoderConfig& config);

  const nn::Mlp& encoder() const { return encoder_; }
  const nn::Mlp& decoder() const { return decoder_; }
  nn::Mlp& encoder() { return encoder_; }
  nn::Mlp& decoder() { return decoder_; }

  std::size_t input_dim() const { return encoder_.in_dim(); }
  std::size_t latent_dim() const { return encoder_.out_dim(); }

  /// Columns are samples.
  Eigen::MatrixXd encode(const Eigen::MatrixXd& x) const { return encoder_.forward_batch(x); }
  Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& x) const;

  /// Mean over all entries of (reconstruction - x)^2.
  double reconstruction_mse(const Eigen::MatrixXd& x) const;

  void save(const std::filesystem::path& dir) const;  // encoder.ckpt + decoder.ckpt
  static Autoencoder load(const std::filesystem::path& dir);

 private:
  nn::Mlp encoder_;
  nn::Mlp decoder_;
};

struct AutoencoderGradients {
  nn::MlpGradients encoder;
  nn::MlpGradients decoder;
};

/// Reconstruction MSE of `x` and, when `grads` is non-null, its gradient.
double autoencoder_loss(const Autoencoder& model, const Eigen::MatrixXd& x, AutoencoderGradients* grads);

struct AutoencoderTraining {
  Autoencoder model;
  std::vector<double> epoch_mse;  // [0] before any update, then after each epoch
};

/// Minibatch training on reconstruction MSE. `features` is D x n with n >= 2.
/// Throws TrainingError (with epoch and last loss) on a non-finite loss.
AutoencoderTraining train_autoencoder(const Eigen::MatrixXd& features, const AutoencoderConfig& config);

}  // namespace igrec::prep
