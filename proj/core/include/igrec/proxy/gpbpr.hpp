#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "igrec/data/dataset.hpp"
#include "igrec/nn/mlp.hpp"
#include "igrec/nn/optimizer.hpp"

namespace igrec::proxy {

struct GpbprConfig {
  std::size_t depth = 2;         // K layers per projection stack
  std::size_t latent_dim = 16;   // projection output width
  nn::Activation activation = nn::Activation::kTanh;
  std::size_t mf_dim = 8;
  double phi = 0.5;              // forced to 1 on context-free data
  double eta = 0.5;              // forced to 1 on context-free data
  double mu = 0.5;               // p = mu * s + (1 - mu) * c
  double lambda = 1e-4;
  bool symmetric_context = false;  // c~t . c~b instead of c~t . v~b
  double factor_init_scale = 0.1;
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  nn::OptimizerConfig optimizer{nn::OptimizerKind::kAdam, 5e-3};
  std::uint64_t seed = 0;
};

/// Matrix-factorization half: per-user and per-bottom biases and factor columns.
struct MfParams {
  double alpha = 0.0;
  std::map<std::string, std::size_t, std::less<>> user_index;
  std::map<std::string, std::size_t, std::less<>> bottom_index;
  Eigen::VectorXd beta_user, beta_bottom;
  Eigen::MatrixXd gamma_user, gamma_bottom;  // mf_dim x count
  Eigen::MatrixXd xi_v_user, xi_v_bottom;
  Eigen::MatrixXd xi_c_user, xi_c_bottom;

  std::size_t dim() const { return static_cast<std::size_t>(gamma_user.rows()); }
  double squared_norm() const;
};

/// Projected latents of one garment.
struct Latents {
  Eigen::VectorXd visual;
  Eigen::VectorXd context;  // empty when the model is visual-only
};

class GpbprModel {
 public:
  nn::Mlp top_visual, bottom_visual;
  nn::Mlp top_context, bottom_context;  // empty when visual-only
  MfParams mf;
  double phi = 1.0;
  double eta = 1.0;
  double mu = 0.5;
  double lambda = 0.0;
  bool symmetric_context = false;

  /// Builds a model sized for `dataset`, registering every user and bottom.
  static GpbprModel create(const data::Dataset& dataset, const GpbprConfig& config);

  bool uses_context() const { return !top_context.empty(); }

  /// Throws ContractError on bad hyperparameters or mismatched stacks.
  void validate() const;

  Latents project_top(const data::Garment& top) const;
  Latents project_bottom(const data::Garment& bottom) const;

  /// s_ij from projected latents.
  double general_compatibility(const Latents& top, const Latents& bottom) const;
  double general_compatibility(const data::Garment& top, const data::Garment& bottom) const;

  /// c_mj. Unknown users fall back to zero factors; unknown bottoms throw ContractError.
  double personal_preference(std::string_view user, std::string_view bottom_id) const;

  /// p = mu * s + (1 - mu) * c.
  double personalized_score(std::string_view user, const data::Garment& top, const data::Garment& bottom) const;

  double regularizer() const;  // ||Theta||^2 over every trainable parameter
  bool all_finite() const;
};

struct GpbprGradients {
  nn::MlpGradients top_visual, bottom_visual, top_context, bottom_context;
  double alpha = 0.0;
  Eigen::VectorXd beta_user, beta_bottom;
  Eigen::MatrixXd gamma_user, gamma_bottom, xi_v_user, xi_v_bottom, xi_c_user, xi_c_bottom;
};

/// Parameter blocks in a fixed order shared by the optimizer and the gradient checker.
nn::ParamBlocks gpbpr_blocks(GpbprModel& model, const GpbprGradients& grads);

/// Mean over `batch` of -ln sigmoid(p_pos - p_neg), plus (lambda / 2) ||Theta||^2.
/// Fills `grads` when non-null.
double bpr_loss(const GpbprModel& model, const data::Dataset& dataset,
                const std::vector<data::OutfitQuadruple>& batch, GpbprGradients* grads);

/// Pairwise ranking accuracy: share of quadruples with p_pos > p_neg, ties count 1/2.
double pairwise_auc(const GpbprModel& model, const data::Dataset& dataset,
                    const std::vector<data::OutfitQuadruple>& quadruples);

struct GpbprTraining {
  GpbprModel model;
  std::vector<double> epoch_loss;  // mean minibatch loss per epoch
  std::vector<double> val_auc;     // per epoch; empty without validation data
};

/// Minibatch BPR training on the train split. Throws ContractError without
/// training quadruples and TrainingError on a non-finite loss.
GpbprTraining train_bpr(const data::Dataset& dataset, const GpbprConfig& config);

/// Percentile min-max normalizer fitted on validation scores.
struct ScoreNormalizer {
  double lo = 0.0;
  double hi = 1.0;

  /// clamp((p - lo) / (hi - lo), 0, 1)
  double normalize(double p) const;
};

/// Nearest-rank percentile: the value at 1-based rank ceil(pct / 100 * n) of the sorted input.
double nearest_rank_percentile(std::vector<double> values, double pct);

inline constexpr std::size_t kMinNormalizerSamples = 20;

/// lo/hi = nearest-rank 5th/95th percentiles of `scores`.
/// Throws ContractError with fewer than 20 scores or when lo == hi.
ScoreNormalizer fit_normalizer(const std::vector<double>& scores);

/// Scores of every validation (user, top, positive bottom) triple, then fit_normalizer.
ScoreNormalizer fit_normalizer(const GpbprModel& model, const data::Dataset& dataset);

inline constexpr const char* kProxyFile = "gpbpr.json";

/// Four MLP checkpoints plus gpbpr.json (MF factors, phi, eta, mu, lambda, normalizer).
void save_proxy(const GpbprModel& model, const std::optional<ScoreNormalizer>& normalizer,
                const std::filesystem::path& dir);

struct LoadedProxy {
  GpbprModel model;
  std::optional<ScoreNormalizer> normalizer;
};
LoadedProxy load_proxy(const std::filesystem::path& dir);

}  // namespace igrec::proxy
