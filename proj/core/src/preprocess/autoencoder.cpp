#include "igrec/preprocess/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "igrec/common/error.hpp"
#include "igrec/common/rng.hpp"
#include "igrec/nn/checkpoint.hpp"

namespace igrec::prep {

AutoencoderConfig AutoencoderConfig::full_scale() {
  AutoencoderConfig config;
  config.hidden_dims = {1024, 512, 128};
  config.latent_dim = 64;
  config.hidden_activation = nn::Activation::kRelu;
  config.latent_activation = nn::Activation::kRelu;
  return config;
}

Autoencoder::Autoencoder(nn::Mlp encoder, nn::Mlp decoder)
    : encoder_(std::move(encoder)), decoder_(std::move(decoder)) {
  if (encoder_.out_dim() != decoder_.in_dim() || decoder_.out_dim() != encoder_.in_dim()) {
    throw ShapeError("decoder must map latent_dim back to the encoder input dim");
  }
}

Autoencoder Autoencoder::create(std::size_t input_dim, const AutoencoderConfig& config) {
  if (input_dim == 0 || config.latent_dim == 0) throw ShapeError("autoencoder dims must be positive");
  Rng rng(config.seed);
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), config.hidden_dims.begin(), config.hidden_dims.end());
  dims.push_back(config.latent_dim);

  std::vector<nn::DenseLayer> enc, dec;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const bool last = i + 2 == dims.size();
    enc.push_back(nn::DenseLayer::init(dims[i], dims[i + 1],
                                       last ? config.latent_activation : config.hidden_activation, rng));
  }
  for (std::size_t i = dims.size() - 1; i > 0; --i) {
    const bool last = i == 1;
    dec.push_back(nn::DenseLayer::init(dims[i], dims[i - 1],
                                       last ? config.output_activation : config.hidden_activation, rng));
  }
  return Autoencoder(nn::Mlp(std::move(enc)), nn::Mlp(std::move(dec)));
}

Eigen::MatrixXd Autoencoder::reconstruct(const Eigen::MatrixXd& x) const {
  return decoder_.forward_batch(encoder_.forward_batch(x));
}

double Autoencoder::reconstruction_mse(const Eigen::MatrixXd& x) const {
  return (reconstruct(x) - x).squaredNorm() / static_cast<double>(x.size());
}

void Autoencoder::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nn::save_mlp(encoder_, dir / "encoder.ckpt");
  nn::save_mlp(decoder_, dir / "decoder.ckpt");
}

Autoencoder Autoencoder::load(const std::filesystem::path& dir) {
  return Autoencoder(nn::load_mlp(dir / "encoder.ckpt"), nn::load_mlp(dir / "decoder.ckpt"));
}

double autoencoder_loss(const Autoencoder& model, const Eigen::MatrixXd& x, AutoencoderGradients* grads) {
  const double n = static_cast<double>(x.size());
  if (!grads) return model.reconstruction_mse(x);
  nn::ForwardCache enc_cache, dec_cache;
  const Eigen::MatrixXd latent = model.encoder().forward_batch(x, enc_cache);
  const Eigen::MatrixXd out = model.decoder().forward_batch(latent, dec_cache);
  const Eigen::MatrixXd diff = out - x;
  grads->decoder = model.decoder().backward(dec_cache, (2.0 / n) * diff);
  grads->encoder = model.encoder().backward(enc_cache, grads->decoder.input);
  return diff.squaredNorm() / n;
}

AutoencoderTraining train_autoencoder(const Eigen::MatrixXd& features, const AutoencoderConfig& config) {
  if (features.cols() < 2) throw ContractError("autoencoder training needs at least 2 feature rows");
  if (config.batch_size == 0) throw ContractError("batch size must be positive");
  AutoencoderTraining result{Autoencoder::create(static_cast<std::size_t>(features.rows()), config), {}};
  Autoencoder& model = result.model;
  nn::Optimizer optimizer(config.optimizer);
  Rng rng(Rng::mix(config.seed));

  result.epoch_mse.push_back(model.reconstruction_mse(features));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(features.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      Eigen::MatrixXd batch(features.rows(), static_cast<Eigen::Index>(end - start));
      for (std::size_t i = start; i < end; ++i) batch.col(static_cast<Eigen::Index>(i - start)) = features.col(order[i]);
      AutoencoderGradients grads;
      const double loss = autoencoder_loss(model, batch, &grads);
      if (!std::isfinite(loss)) {
        throw TrainingError("autoencoder loss became non-finite at epoch " + std::to_string(epoch) +
                            " (last epoch MSE " + std::to_string(result.epoch_mse.back()) + ")");
      }
      nn::ParamBlocks blocks;
      model.encoder().append_blocks("encoder", grads.encoder, blocks);
      model.decoder().append_blocks("decoder", grads.decoder, blocks);
      optimizer.step(blocks);
    }
    const double mse = model.reconstruction_mse(features);
    if (!std::isfinite(mse)) {
      throw TrainingError("autoencoder reconstruction MSE is non-finite after epoch " + std::to_string(epoch));
    }
    result.epoch_mse.push_back(mse);
  }
  return result;
}

}  // namespace igrec::prep
