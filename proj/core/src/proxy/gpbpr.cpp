#include "igrec/proxy/gpbpr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "igrec/common/binary_io.hpp"
#include "igrec/common/error.hpp"
#include "igrec/common/rng.hpp"
#include "igrec/nn/checkpoint.hpp"

namespace igrec::proxy {
namespace {

bool in_unit_interval(double x) { return x >= 0.0 && x <= 1.0; }

nn::Mlp make_stack(std::size_t in, const GpbprConfig& config, Rng& rng) {
  std::vector<std::size_t> dims{in};
  for (std::size_t k = 0; k < config.depth; ++k) dims.push_back(config.latent_dim);
  return nn::Mlp::create(dims, config.activation, config.activation, rng);
}

Eigen::MatrixXd small_normal(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = scale * rng.normal();
  return m;
}

// -ln sigmoid(d), stable for large |d|.
double softplus_neg(double d) { return d > 0 ? std::log1p(std::exp(-d)) : -d + std::log1p(std::exp(d)); }

std::optional<std::size_t> lookup(const std::map<std::string, std::size_t, std::less<>>& index, std::string_view id) {
  const auto it = index.find(id);
  if (it == index.end()) return std::nullopt;
  return it->second;
}

std::size_t bottom_slot(const MfParams& mf, std::string_view id) {
  const auto slot = lookup(mf.bottom_index, id);
  if (!slot) throw ContractError("bottom '" + std::string(id) + "' is not registered in the proxy");
  return *slot;
}

const Eigen::VectorXd& context_of(const data::Garment& g) {
  if (!g.context) throw ContractError("garment '" + g.id + "' has no context feature but the proxy uses context");
  return *g.context;
}

}  // namespace

double MfParams::squared_norm() const {
  return alpha * alpha + beta_user.squaredNorm() + beta_bottom.squaredNorm() + gamma_user.squaredNorm() +
         gamma_bottom.squaredNorm() + xi_v_user.squaredNorm() + xi_v_bottom.squaredNorm() +
         xi_c_user.squaredNorm() + xi_c_bottom.squaredNorm();
}

GpbprModel GpbprModel::create(const data::Dataset& dataset, const GpbprConfig& config) {
  if (config.depth == 0 || config.latent_dim == 0 || config.mf_dim == 0) {
    throw ContractError("proxy depth, latent_dim and mf_dim must be positive");
  }
  Rng rng(config.seed);
  GpbprModel model;
  const bool context = dataset.context_dim.has_value();
  model.phi = context ? config.phi : 1.0;
  model.eta = context ? config.eta : 1.0;
  model.mu = config.mu;
  model.lambda = config.lambda;
  model.symmetric_context = config.symmetric_context;
  model.top_visual = make_stack(dataset.feature_dim, config, rng);
  model.bottom_visual = make_stack(dataset.feature_dim, config, rng);
  if (context) {
    model.top_context = make_stack(*dataset.context_dim, config, rng);
    model.bottom_context = make_stack(*dataset.context_dim, config, rng);
  }

  MfParams& mf = model.mf;
  for (const auto& user : dataset.users) mf.user_index.emplace(user, mf.user_index.size());
  for (const auto& bottom : dataset.ids(data::Category::kBottom)) mf.bottom_index.emplace(bottom, mf.bottom_index.size());
  const std::size_t users = mf.user_index.size();
  const std::size_t bottoms = mf.bottom_index.size();
  const double scale = config.factor_init_scale;
  mf.beta_user = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(users));
  mf.beta_bottom = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(bottoms));
  mf.gamma_user = small_normal(config.mf_dim, users, scale, rng);
  mf.gamma_bottom = small_normal(config.mf_dim, bottoms, scale, rng);
  mf.xi_v_user = small_normal(config.mf_dim, users, scale, rng);
  mf.xi_v_bottom = small_normal(config.mf_dim, bottoms, scale, rng);
  mf.xi_c_user = small_normal(config.mf_dim, users, scale, rng);
  mf.xi_c_bottom = small_normal(config.mf_dim, bottoms, scale, rng);
  model.validate();
  return model;
}

void GpbprModel::validate() const {
  if (!in_unit_interval(phi) || !in_unit_interval(eta) || !in_unit_interval(mu)) {
    throw ContractError("phi, eta and mu must lie in [0, 1]");
  }
  if (lambda < 0.0) throw ContractError("lambda must be non-negative");
  if (top_visual.empty() || bottom_visual.empty()) throw ContractError("visual projection stacks are required");
  if (top_visual.out_dim() != bottom_visual.out_dim()) throw ShapeError("visual stacks disagree on latent dim");
  if (top_context.empty() != bottom_context.empty()) throw ContractError("context stacks must be both present or absent");
  if (uses_context() && (top_context.out_dim() != top_visual.out_dim() || bottom_context.out_dim() != top_visual.out_dim())) {
    throw ShapeError("context stacks must share the visual latent dim");
  }
  if (!uses_context() && phi != 1.0) throw ContractError("a visual-only proxy requires phi = 1");
  const auto u = static_cast<Eigen::Index>(mf.user_index.size());
  const auto b = static_cast<Eigen::Index>(mf.bottom_index.size());
  const auto f = mf.gamma_user.rows();
  const bool shapes_ok = mf.beta_user.size() == u && mf.beta_bottom.size() == b && mf.gamma_user.cols() == u &&
                         mf.gamma_bottom.cols() == b && mf.xi_v_user.cols() == u && mf.xi_v_bottom.cols() == b &&
                         mf.xi_c_user.cols() == u && mf.xi_c_bottom.cols() == b && mf.gamma_bottom.rows() == f &&
                         mf.xi_v_user.rows() == f && mf.xi_v_bottom.rows() == f && mf.xi_c_user.rows() == f &&
                         mf.xi_c_bottom.rows() == f;
  if (!shapes_ok) throw ShapeError("matrix-factorization tables have inconsistent shapes");
}

Latents GpbprModel::project_top(const data::Garment& top) const {
  Latents out{top_visual.forward(top.feature), {}};
  if (uses_context()) out.context = top_context.forward(context_of(top));
  return out;
}

Latents GpbprModel::project_bottom(const data::Garment& bottom) const {
  Latents out{bottom_visual.forward(bottom.feature), {}};
  if (uses_context() && symmetric_context) out.context = bottom_context.forward(context_of(bottom));
  return out;
}

double GpbprModel::general_compatibility(const Latents& top, const Latents& bottom) const {
  double s = phi * top.visual.dot(bottom.visual);
  if (phi < 1.0) {
    if (top.context.size() == 0) throw ContractError("phi < 1 needs the top's context latent");
    if (symmetric_context) {
      if (bottom.context.size() == 0) throw ContractError("symmetric context needs the bottom's context latent");
      s += (1.0 - phi) * top.context.dot(bottom.context);
    } else {
      s += (1.0 - phi) * top.context.dot(bottom.visual);
    }
  }
  return s;
}

double GpbprModel::general_compatibility(const data::Garment& top, const data::Garment& bottom) const {
  return general_compatibility(project_top(top), project_bottom(bottom));
}

double GpbprModel::personal_preference(std::string_view user, std::string_view bottom_id) const {
  const std::size_t j = bottom_slot(mf, bottom_id);
  double c = mf.alpha + mf.beta_bottom(static_cast<Eigen::Index>(j));
  if (const auto m = lookup(mf.user_index, user)) {
    const auto mi = static_cast<Eigen::Index>(*m);
    const auto ji = static_cast<Eigen::Index>(j);
    c += mf.beta_user(mi) + mf.gamma_user.col(mi).dot(mf.gamma_bottom.col(ji)) +
         eta * mf.xi_v_user.col(mi).dot(mf.xi_v_bottom.col(ji)) +
         (1.0 - eta) * mf.xi_c_user.col(mi).dot(mf.xi_c_bottom.col(ji));
  }
  return c;
}

double GpbprModel::personalized_score(std::string_view user, const data::Garment& top,
                                      const data::Garment& bottom) const {
  return mu * general_compatibility(top, bottom) + (1.0 - mu) * personal_preference(user, bottom.id);
}

double GpbprModel::regularizer() const {
  return top_visual.squared_norm() + bottom_visual.squared_norm() + top_context.squared_norm() +
         bottom_context.squared_norm() + mf.squared_norm();
}

bool GpbprModel::all_finite() const {
  return top_visual.all_finite() && bottom_visual.all_finite() && top_context.all_finite() &&
         bottom_context.all_finite() && std::isfinite(mf.squared_norm());
}

nn::ParamBlocks gpbpr_blocks(GpbprModel& model, const GpbprGradients& grads) {
  nn::ParamBlocks blocks;
  model.top_visual.append_blocks("top_visual", grads.top_visual, blocks);
  model.bottom_visual.append_blocks("bottom_visual", grads.bottom_visual, blocks);
  if (model.uses_context()) {
    model.top_context.append_blocks("top_context", grads.top_context, blocks);
    model.bottom_context.append_blocks("bottom_context", grads.bottom_context, blocks);
  }
  MfParams& mf = model.mf;
  blocks.push_back(nn::make_block("mf.alpha", mf.alpha, grads.alpha));
  blocks.push_back(nn::make_block("mf.beta_user", mf.beta_user, grads.beta_user));
  blocks.push_back(nn::make_block("mf.beta_bottom", mf.beta_bottom, grads.beta_bottom));
  blocks.push_back(nn::make_block("mf.gamma_user", mf.gamma_user, grads.gamma_user));
  blocks.push_back(nn::make_block("mf.gamma_bottom", mf.gamma_bottom, grads.gamma_bottom));
  blocks.push_back(nn::make_block("mf.xi_v_user", mf.xi_v_user, grads.xi_v_user));
  blocks.push_back(nn::make_block("mf.xi_v_bottom", mf.xi_v_bottom, grads.xi_v_bottom));
  blocks.push_back(nn::make_block("mf.xi_c_user", mf.xi_c_user, grads.xi_c_user));
  blocks.push_back(nn::make_block("mf.xi_c_bottom", mf.xi_c_bottom, grads.xi_c_bottom));
  return blocks;
}

double bpr_loss(const GpbprModel& model, const data::Dataset& dataset,
                const std::vector<data::OutfitQuadruple>& batch, GpbprGradients* grads) {
  if (batch.empty()) throw ContractError("bpr_loss needs at least one quadruple");
  const auto n = static_cast<Eigen::Index>(batch.size());
  const bool context = model.uses_context() && model.phi < 1.0;
  const bool sym = context && model.symmetric_context;

  Eigen::MatrixXd top_v(static_cast<Eigen::Index>(dataset.feature_dim), n);
  Eigen::MatrixXd bottom_v(static_cast<Eigen::Index>(dataset.feature_dim), 2 * n);
  Eigen::MatrixXd top_c, bottom_c;
  if (context) top_c.resize(static_cast<Eigen::Index>(*dataset.context_dim), n);
  if (sym) bottom_c.resize(static_cast<Eigen::Index>(*dataset.context_dim), 2 * n);
  for (Eigen::Index q = 0; q < n; ++q) {
    const auto& quad = batch[static_cast<std::size_t>(q)];
    const auto& top = dataset.garment(quad.top);
    const auto& pos = dataset.garment(quad.positive);
    const auto& neg = dataset.garment(quad.negative);
    top_v.col(q) = top.feature;
    bottom_v.col(q) = pos.feature;
    bottom_v.col(n + q) = neg.feature;
    if (context) top_c.col(q) = context_of(top);
    if (sym) {
      bottom_c.col(q) = context_of(pos);
      bottom_c.col(n + q) = context_of(neg);
    }
  }

  nn::ForwardCache tv_cache, bv_cache, tc_cache, bc_cache;
  const Eigen::MatrixXd vt = model.top_visual.forward_batch(top_v, tv_cache);
  const Eigen::MatrixXd vb = model.bottom_visual.forward_batch(bottom_v, bv_cache);
  Eigen::MatrixXd ct, cb;
  if (context) ct = model.top_context.forward_batch(top_c, tc_cache);
  if (sym) cb = model.bottom_context.forward_batch(bottom_c, bc_cache);

  const MfParams& mf = model.mf;
  const double phi = model.phi, mu = model.mu, eta = model.eta;
  Eigen::MatrixXd d_vt, d_vb, d_ct, d_cb;
  if (grads) {
    d_vt = Eigen::MatrixXd::Zero(vt.rows(), vt.cols());
    d_vb = Eigen::MatrixXd::Zero(vb.rows(), vb.cols());
    if (context) d_ct = Eigen::MatrixXd::Zero(ct.rows(), ct.cols());
    if (sym) d_cb = Eigen::MatrixXd::Zero(cb.rows(), cb.cols());
    grads->alpha = model.lambda * mf.alpha;
    grads->beta_user = model.lambda * mf.beta_user;
    grads->beta_bottom = model.lambda * mf.beta_bottom;
    grads->gamma_user = model.lambda * mf.gamma_user;
    grads->gamma_bottom = model.lambda * mf.gamma_bottom;
    grads->xi_v_user = model.lambda * mf.xi_v_user;
    grads->xi_v_bottom = model.lambda * mf.xi_v_bottom;
    grads->xi_c_user = model.lambda * mf.xi_c_user;
    grads->xi_c_bottom = model.lambda * mf.xi_c_bottom;
  }

  double data_loss = 0.0;
  for (Eigen::Index q = 0; q < n; ++q) {
    const auto& quad = batch[static_cast<std::size_t>(q)];
    const Eigen::Index p = q, k = n + q;
    auto general = [&](Eigen::Index b) {
      double s = phi * vt.col(q).dot(vb.col(b));
      if (context) s += (1.0 - phi) * (sym ? ct.col(q).dot(cb.col(b)) : ct.col(q).dot(vb.col(b)));
      return s;
    };
    const double s_diff = general(p) - general(k);
    const double c_diff = model.personal_preference(quad.user, quad.positive) -
                          model.personal_preference(quad.user, quad.negative);
    const double d = mu * s_diff + (1.0 - mu) * c_diff;
    data_loss += softplus_neg(d);
    if (!grads) continue;

    // dL/dd for the mean loss: -sigmoid(-d) / n
    const double g = -nn::sigmoid(-d) / static_cast<double>(n);
    const double gs = g * mu;
    d_vt.col(q) += gs * phi * (vb.col(p) - vb.col(k));
    Eigen::VectorXd to_bottom = phi * vt.col(q);
    if (context && !sym) to_bottom += (1.0 - phi) * ct.col(q);
    d_vb.col(p) += gs * to_bottom;
    d_vb.col(k) -= gs * to_bottom;
    if (context) {
      d_ct.col(q) += gs * (1.0 - phi) * (sym ? Eigen::VectorXd(cb.col(p) - cb.col(k)) : Eigen::VectorXd(vb.col(p) - vb.col(k)));
    }
    if (sym) {
      d_cb.col(p) += gs * (1.0 - phi) * ct.col(q);
      d_cb.col(k) -= gs * (1.0 - phi) * ct.col(q);
    }

    const double gc = g * (1.0 - mu);
    const auto j = static_cast<Eigen::Index>(bottom_slot(mf, quad.positive));
    const auto kk = static_cast<Eigen::Index>(bottom_slot(mf, quad.negative));
    grads->beta_bottom(j) += gc;
    grads->beta_bottom(kk) -= gc;
    if (const auto m = lookup(mf.user_index, quad.user)) {
      const auto mi = static_cast<Eigen::Index>(*m);
      grads->gamma_user.col(mi) += gc * (mf.gamma_bottom.col(j) - mf.gamma_bottom.col(kk));
      grads->gamma_bottom.col(j) += gc * mf.gamma_user.col(mi);
      grads->gamma_bottom.col(kk) -= gc * mf.gamma_user.col(mi);
      grads->xi_v_user.col(mi) += gc * eta * (mf.xi_v_bottom.col(j) - mf.xi_v_bottom.col(kk));
      grads->xi_v_bottom.col(j) += gc * eta * mf.xi_v_user.col(mi);
      grads->xi_v_bottom.col(kk) -= gc * eta * mf.xi_v_user.col(mi);
      grads->xi_c_user.col(mi) += gc * (1.0 - eta) * (mf.xi_c_bottom.col(j) - mf.xi_c_bottom.col(kk));
      grads->xi_c_bottom.col(j) += gc * (1.0 - eta) * mf.xi_c_user.col(mi);
      grads->xi_c_bottom.col(kk) -= gc * (1.0 - eta) * mf.xi_c_user.col(mi);
    }
  }

  if (grads) {
    const double lambda = model.lambda;
    auto finish = [lambda](const nn::Mlp& mlp, const nn::ForwardCache& cache, const Eigen::MatrixXd& upstream,
                           nn::MlpGradients& out) {
      if (cache.empty()) {
        out.set_zero_like(mlp);
      } else {
        out = mlp.backward(cache, upstream);
      }
      for (std::size_t l = 0; l < out.layers.size(); ++l) {
        out.layers[l].weights += lambda * mlp.layers()[l].weights;
        out.layers[l].bias += lambda * mlp.layers()[l].bias;
      }
    };
    finish(model.top_visual, tv_cache, d_vt, grads->top_visual);
    finish(model.bottom_visual, bv_cache, d_vb, grads->bottom_visual);
    if (model.uses_context()) {
      finish(model.top_context, tc_cache, d_ct, grads->top_context);
      finish(model.bottom_context, bc_cache, d_cb, grads->bottom_context);
    }
  }
  return data_loss / static_cast<double>(n) + 0.5 * model.lambda * model.regularizer();
}

double pairwise_auc(const GpbprModel& model, const data::Dataset& dataset,
                    const std::vector<data::OutfitQuadruple>& quadruples) {
  if (quadruples.empty()) throw ContractError("pairwise_auc needs at least one quadruple");
  double hits = 0.0;
  for (const auto& q : quadruples) {
    const auto& top = dataset.garment(q.top);
    const double pos = model.personalized_score(q.user, top, dataset.garment(q.positive));
    const double neg = model.personalized_score(q.user, top, dataset.garment(q.negative));
    hits += pos > neg ? 1.0 : (pos == neg ? 0.5 : 0.0);
  }
  return hits / static_cast<double>(quadruples.size());
}

GpbprTraining train_bpr(const data::Dataset& dataset, const GpbprConfig& config) {
  auto train = dataset.quadruples_in(data::Split::kTrain);
  if (train.empty()) throw ContractError("train_bpr needs training quadruples");
  if (config.batch_size == 0) throw ContractError("batch size must be positive");
  const auto val = dataset.quadruples_in(data::Split::kVal);

  GpbprTraining result{GpbprModel::create(dataset, config), {}, {}};
  GpbprModel& model = result.model;
  nn::Optimizer optimizer(config.optimizer);
  Rng rng(Rng::mix(config.seed ^ 0x6270727ULL));
  std::vector<data::OutfitQuadruple> batch;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span(train));
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < train.size(); start += config.batch_size) {
      const std::size_t end = std::min(train.size(), start + config.batch_size);
      batch.assign(train.begin() + static_cast<std::ptrdiff_t>(start), train.begin() + static_cast<std::ptrdiff_t>(end));
      GpbprGradients grads;
      const double loss = bpr_loss(model, dataset, batch, &grads);
      if (!std::isfinite(loss)) {
        throw TrainingError("BPR loss became non-finite at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batches));
      }
      optimizer.step(gpbpr_blocks(model, grads));
      total += loss;
      ++batches;
    }
    result.epoch_loss.push_back(total / static_cast<double>(batches));
    if (!val.empty()) result.val_auc.push_back(pairwise_auc(model, dataset, val));
  }
  return result;
}

double ScoreNormalizer::normalize(double p) const { return std::clamp((p - lo) / (hi - lo), 0.0, 1.0); }

double nearest_rank_percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw ContractError("percentile of an empty sample");
  if (!(pct > 0.0 && pct <= 100.0)) throw ContractError("percentile must lie in (0, 100]");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

ScoreNormalizer fit_normalizer(const std::vector<double>& scores) {
  if (scores.size() < kMinNormalizerSamples) {
    throw ContractError("normalizer needs at least " + std::to_string(kMinNormalizerSamples) + " scores, got " +
                        std::to_string(scores.size()));
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw ContractError("normalizer received a non-finite score");
  }
  ScoreNormalizer out{nearest_rank_percentile(scores, 5.0), nearest_rank_percentile(scores, 95.0)};
  if (!(out.lo < out.hi)) throw ContractError("degenerate score distribution: 5th and 95th percentiles coincide");
  return out;
}

ScoreNormalizer fit_normalizer(const GpbprModel& model, const data::Dataset& dataset) {
  std::vector<double> scores;
  for (const auto& q : dataset.quadruples_in(data::Split::kVal)) {
    scores.push_back(model.personalized_score(q.user, dataset.garment(q.top), dataset.garment(q.positive)));
  }
  return fit_normalizer(scores);
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json cols = nlohmann::json::array();
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    cols.push_back(std::vector<double>(m.col(j).data(), m.col(j).data() + m.rows()));
  }
  return cols;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& cols, std::size_t rows, std::size_t count, const char* name) {
  if (cols.size() != count) throw LoadError(std::string(name) + ": expected " + std::to_string(count) + " columns");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(count));
  for (std::size_t j = 0; j < count; ++j) {
    const auto col = cols[j].get<std::vector<double>>();
    if (col.size() != rows) throw LoadError(std::string(name) + ": column length differs from mf_dim");
    for (std::size_t i = 0; i < rows; ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
  }
  return m;
}

std::vector<std::string> ordered_ids(const std::map<std::string, std::size_t, std::less<>>& index) {
  std::vector<std::string> ids(index.size());
  for (const auto& [id, slot] : index) ids[slot] = id;
  return ids;
}

}  // namespace

void save_proxy(const GpbprModel& model, const std::optional<ScoreNormalizer>& normalizer,
                const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nn::save_mlp(model.top_visual, dir / "top_visual.ckpt");
  nn::save_mlp(model.bottom_visual, dir / "bottom_visual.ckpt");
  if (model.uses_context()) {
    nn::save_mlp(model.top_context, dir / "top_context.ckpt");
    nn::save_mlp(model.bottom_context, dir / "bottom_context.ckpt");
  }
  const MfParams& mf = model.mf;
  nlohmann::json doc = {
      {"format", "igrec-gpbpr"},
      {"version", 1},
      {"phi", model.phi},
      {"eta", model.eta},
      {"mu", model.mu},
      {"lambda", model.lambda},
      {"symmetric_context", model.symmetric_context},
      {"uses_context", model.uses_context()},
      {"mf",
       {{"dim", mf.dim()},
        {"alpha", mf.alpha},
        {"users", ordered_ids(mf.user_index)},
        {"bottoms", ordered_ids(mf.bottom_index)},
        {"beta_user", std::vector<double>(mf.beta_user.data(), mf.beta_user.data() + mf.beta_user.size())},
        {"beta_bottom", std::vector<double>(mf.beta_bottom.data(), mf.beta_bottom.data() + mf.beta_bottom.size())},
        {"gamma_user", matrix_json(mf.gamma_user)},
        {"gamma_bottom", matrix_json(mf.gamma_bottom)},
        {"xi_v_user", matrix_json(mf.xi_v_user)},
        {"xi_v_bottom", matrix_json(mf.xi_v_bottom)},
        {"xi_c_user", matrix_json(mf.xi_c_user)},
        {"xi_c_bottom", matrix_json(mf.xi_c_bottom)}}},
      {"normalizer", nullptr}};
  if (normalizer) doc["normalizer"] = {{"lo", normalizer->lo}, {"hi", normalizer->hi}, {"rule", "nearest-rank p5/p95"}};
  io::write_text_file(dir / kProxyFile, doc.dump());
}

LoadedProxy load_proxy(const std::filesystem::path& dir) {
  const auto path = dir / kProxyFile;
  try {
    const auto doc = nlohmann::json::parse(io::read_text_file(path));
    if (doc.at("format") != "igrec-gpbpr" || doc.at("version") != 1) throw LoadError("unsupported proxy format");
    LoadedProxy out;
    GpbprModel& model = out.model;
    model.phi = doc.at("phi").get<double>();
    model.eta = doc.at("eta").get<double>();
    model.mu = doc.at("mu").get<double>();
    model.lambda = doc.at("lambda").get<double>();
    model.symmetric_context = doc.at("symmetric_context").get<bool>();
    model.top_visual = nn::load_mlp(dir / "top_visual.ckpt");
    model.bottom_visual = nn::load_mlp(dir / "bottom_visual.ckpt");
    if (doc.at("uses_context").get<bool>()) {
      model.top_context = nn::load_mlp(dir / "top_context.ckpt");
      model.bottom_context = nn::load_mlp(dir / "bottom_context.ckpt");
    }
    const auto& mfj = doc.at("mf");
    MfParams& mf = model.mf;
    const auto dim = mfj.at("dim").get<std::size_t>();
    mf.alpha = mfj.at("alpha").get<double>();
    for (const auto& id : mfj.at("users").get<std::vector<std::string>>()) mf.user_index.emplace(id, mf.user_index.size());
    for (const auto& id : mfj.at("bottoms").get<std::vector<std::string>>()) mf.bottom_index.emplace(id, mf.bottom_index.size());
    const std::size_t users = mf.user_index.size(), bottoms = mf.bottom_index.size();
    const auto bu = mfj.at("beta_user").get<std::vector<double>>();
    const auto bb = mfj.at("beta_bottom").get<std::vector<double>>();
    if (bu.size() != users || bb.size() != bottoms) throw LoadError("bias tables do not match the id lists");
    mf.beta_user = Eigen::Map<const Eigen::VectorXd>(bu.data(), static_cast<Eigen::Index>(bu.size()));
    mf.beta_bottom = Eigen::Map<const Eigen::VectorXd>(bb.data(), static_cast<Eigen::Index>(bb.size()));
    mf.gamma_user = matrix_from_json(mfj.at("gamma_user"), dim, users, "gamma_user");
    mf.gamma_bottom = matrix_from_json(mfj.at("gamma_bottom"), dim, bottoms, "gamma_bottom");
    mf.xi_v_user = matrix_from_json(mfj.at("xi_v_user"), dim, users, "xi_v_user");
    mf.xi_v_bottom = matrix_from_json(mfj.at("xi_v_bottom"), dim, bottoms, "xi_v_bottom");
    mf.xi_c_user = matrix_from_json(mfj.at("xi_c_user"), dim, users, "xi_c_user");
    mf.xi_c_bottom = matrix_from_json(mfj.at("xi_c_bottom"), dim, bottoms, "xi_c_bottom");
    if (!doc.at("normalizer").is_null()) {
      out.normalizer = ScoreNormalizer{doc["normalizer"].at("lo").get<double>(), doc["normalizer"].at("hi").get<double>()};
    }
    try {
      model.validate();
    } catch (const Error& e) {
      throw LoadError(e.what());
    }
    return out;
  } catch (const LoadError& e) {
    throw LoadError(path.string() + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

}  // namespace igrec::proxy
