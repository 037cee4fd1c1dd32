#pragma once

#include <cstddef>
#include <string>

#include <Eigen/Core>

#include "igrec/common/rng.hpp"
#include "igrec/nn/params.hpp"

namespace igrec::nn {

/// Standard LSTM cell. Gate rows are stacked as [input; forget; candidate; output].
///
///   i = sig(Wi x + Ui h + bi)   f = sig(Wf x + Uf h + bf)
///   g = tanh(Wg x + Ug h + bg)  o = sig(Wo x + Uo h + bo)
///   c' = f * c + i * g          h' = o * tanh(c')
struct LstmCell {
  Eigen::MatrixXd w_input;   // 4H x I
  Eigen::MatrixXd w_hidden;  // 4H x H
  Eigen::VectorXd bias;      // 4H

  struct State {
    Eigen::VectorXd hidden;
    Eigen::VectorXd cell;
  };

  struct StepCache {
    Eigen::VectorXd input, hidden_prev, cell_prev;
    Eigen::VectorXd in_gate, forget_gate, candidate, out_gate, cell, cell_tanh;
  };

  struct Gradients {
    Eigen::MatrixXd w_input;
    Eigen::MatrixXd w_hidden;
    Eigen::VectorXd bias;

    void set_zero_like(const LstmCell& cell);
  };

  /// Uniform in [-1/sqrt(H), 1/sqrt(H)].
  static LstmCell init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);

  std::size_t input_dim() const { return static_cast<std::size_t>(w_input.cols()); }
  std::size_t hidden_dim() const { return static_cast<std::size_t>(w_hidden.cols()); }

  /// Zero cell memory, hidden set to `hidden`.
  State initial_state(const Eigen::VectorXd& hidden) const;

  State step(const State& state, const Eigen::VectorXd& input) const;
  State step(const State& state, const Eigen::VectorXd& input, StepCache& cache) const;

  /// Given dL/dh' and dL/dc' for one step, accumulates parameter gradients into
  /// `grads` and writes dL/dh, dL/dc and dL/dx for the step's inputs.
  void backward_step(const StepCache& cache, const Eigen::VectorXd& d_hidden,
                     const Eigen::VectorXd& d_cell, Gradients& grads, Eigen::VectorXd& d_hidden_prev,
                     Eigen::VectorXd& d_cell_prev, Eigen::VectorXd& d_input) const;

  void append_blocks(const std::string& prefix, const Gradients& grads, ParamBlocks& blocks);

  double squared_norm() const;

 private:
  void validate(const State& state, const Eigen::VectorXd& input) const;
};

}  // namespace igrec::nn
