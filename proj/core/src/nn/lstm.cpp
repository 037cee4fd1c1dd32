#include "igrec/nn/lstm.hpp"

#include <cmath>

#include "igrec/common/error.hpp"
#include "igrec/nn/activation.hpp"

namespace igrec::nn {
namespace {

Eigen::VectorXd sigmoid_vec(const Eigen::VectorXd& v) {
  return v.unaryExpr([](double x) { return sigmoid(x); });
}

}  // namespace

void LstmCell::Gradients::set_zero_like(const LstmCell& cell) {
  w_input = Eigen::MatrixXd::Zero(cell.w_input.rows(), cell.w_input.cols());
  w_hidden = Eigen::MatrixXd::Zero(cell.w_hidden.rows(), cell.w_hidden.cols());
  bias = Eigen::VectorXd::Zero(cell.bias.size());
}

LstmCell LstmCell::init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  if (input_dim == 0 || hidden_dim == 0) throw ShapeError("LSTM dimensions must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  const auto rows = static_cast<Eigen::Index>(4 * hidden_dim);
  LstmCell cell;
  cell.w_input.resize(rows, static_cast<Eigen::Index>(input_dim));
  cell.w_hidden.resize(rows, static_cast<Eigen::Index>(hidden_dim));
  cell.bias.resize(rows);
  for (Eigen::Index i = 0; i < cell.w_input.size(); ++i) cell.w_input.data()[i] = rng.uniform(-bound, bound);
  for (Eigen::Index i = 0; i < cell.w_hidden.size(); ++i) cell.w_hidden.data()[i] = rng.uniform(-bound, bound);
  for (Eigen::Index i = 0; i < cell.bias.size(); ++i) cell.bias(i) = rng.uniform(-bound, bound);
  return cell;
}

LstmCell::State LstmCell::initial_state(const Eigen::VectorXd& hidden) const {
  if (static_cast<std::size_t>(hidden.size()) != hidden_dim()) {
    throw ShapeError("initial hidden has length " + std::to_string(hidden.size()) + ", expected " +
                     std::to_string(hidden_dim()));
  }
  return {hidden, Eigen::VectorXd::Zero(hidden.size())};
}

void LstmCell::validate(const State& state, const Eigen::VectorXd& input) const {
  const auto h = static_cast<Eigen::Index>(hidden_dim());
  if (state.hidden.size() != h || state.cell.size() != h) {
    throw ShapeError("LSTM state has length " + std::to_string(state.hidden.size()) + ", expected " +
                     std::to_string(h));
  }
  if (static_cast<std::size_t>(input.size()) != input_dim()) {
    throw ShapeError("LSTM input has length " + std::to_string(input.size()) + ", expected " +
                     std::to_string(input_dim()));
  }
}

LstmCell::State LstmCell::step(const State& state, const Eigen::VectorXd& input) const {
  StepCache cache;
  return step(state, input, cache);
}

LstmCell::State LstmCell::step(const State& state, const Eigen::VectorXd& input,
                               StepCache& cache) const {
  validate(state, input);
  const auto h = static_cast<Eigen::Index>(hidden_dim());
  const Eigen::VectorXd z = w_input * input + w_hidden * state.hidden + bias;
  cache.input = input;
  cache.hidden_prev = state.hidden;
  cache.cell_prev = state.cell;
  cache.in_gate = sigmoid_vec(z.segment(0, h));
  cache.forget_gate = sigmoid_vec(z.segment(h, h));
  cache.candidate = z.segment(2 * h, h).array().tanh().matrix();
  cache.out_gate = sigmoid_vec(z.segment(3 * h, h));
  cache.cell = cache.forget_gate.cwiseProduct(state.cell) + cache.in_gate.cwiseProduct(cache.candidate);
  cache.cell_tanh = cache.cell.array().tanh().matrix();
  return {cache.out_gate.cwiseProduct(cache.cell_tanh), cache.cell};
}

void LstmCell::backward_step(const StepCache& cache, const Eigen::VectorXd& d_hidden,
                             const Eigen::VectorXd& d_cell, Gradients& grads,
                             Eigen::VectorXd& d_hidden_prev, Eigen::VectorXd& d_cell_prev,
                             Eigen::VectorXd& d_input) const {
  const auto h = static_cast<Eigen::Index>(hidden_dim());
  if (cache.cell.size() != h) throw StateError("LSTM backward called without a cached step");
  const Eigen::ArrayXd tanh_c = cache.cell_tanh.array();
  const Eigen::ArrayXd d_out = d_hidden.array() * tanh_c;
  const Eigen::ArrayXd dc = d_cell.array() + d_hidden.array() * cache.out_gate.array() * (1.0 - tanh_c.square());

  Eigen::VectorXd dz(4 * h);
  const Eigen::ArrayXd i = cache.in_gate.array();
  const Eigen::ArrayXd f = cache.forget_gate.array();
  const Eigen::ArrayXd g = cache.candidate.array();
  const Eigen::ArrayXd o = cache.out_gate.array();
  dz.segment(0, h) = (dc * g * i * (1.0 - i)).matrix();
  dz.segment(h, h) = (dc * cache.cell_prev.array() * f * (1.0 - f)).matrix();
  dz.segment(2 * h, h) = (dc * i * (1.0 - g.square())).matrix();
  dz.segment(3 * h, h) = (d_out * o * (1.0 - o)).matrix();

  grads.w_input += dz * cache.input.transpose();
  grads.w_hidden += dz * cache.hidden_prev.transpose();
  grads.bias += dz;
  d_hidden_prev = w_hidden.transpose() * dz;
  d_cell_prev = (dc * f).matrix();
  d_input = w_input.transpose() * dz;
}

void LstmCell::append_blocks(const std::string& prefix, const Gradients& grads, ParamBlocks& blocks) {
  blocks.push_back(make_block(prefix + ".w_input", w_input, grads.w_input));
  blocks.push_back(make_block(prefix + ".w_hidden", w_hidden, grads.w_hidden));
  blocks.push_back(make_block(prefix + ".bias", bias, grads.bias));
}

double LstmCell::squared_norm() const {
  return w_input.squaredNorm() + w_hidden.squaredNorm() + bias.squaredNorm();
}

}  // namespace igrec::nn
