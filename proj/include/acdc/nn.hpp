#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "acdc/types.hpp"

// Minimal dense/LSTM toolkit with hand-written reverse-mode gradients.
// Batches are column-major: a (features x batch) matrix holds one sample per column.
namespace acdc::nn {

enum class Activation { identity, relu, tanh };

// Named view of one contiguous parameter (or gradient) block.
struct ParamBlock {
  std::string name;
  double* data = nullptr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  Eigen::Index size() const { return rows * cols; }
  Eigen::Map<Mat> map() const { return Eigen::Map<Mat>(data, rows, cols); }
};

using ParamList = std::vector<ParamBlock>;

void append_block(ParamList& out, const std::string& name, Mat& m);
void append_block(ParamList& out, const std::string& name, Vec& v);

// ---------------------------------------------------------------------------
// Dense

struct DenseGrads {
  Mat weights;
  Vec bias;

  void collect(ParamList& out, const std::string& prefix);
};

struct DenseLayer {
  Mat weights;  // out x in
  Vec bias;     // out
  Activation activation = Activation::identity;

  // Weights ~ U(-1/sqrt(in), 1/sqrt(in)), zero bias.
  static DenseLayer init(int in_dim, int out_dim, Activation activation, Rng& rng);

  int in_dim() const { return static_cast<int>(weights.cols()); }
  int out_dim() const { return static_cast<int>(weights.rows()); }
  DenseGrads zero_grads() const;
  void collect(ParamList& out, const std::string& prefix);
};

Mat dense_forward(const DenseLayer& layer, const Mat& x);

struct DenseBackward {
  Mat dx;
  DenseGrads grads;
};

// Gradients of sum(dy .* y) w.r.t. input and parameters; y is recomputed from x.
DenseBackward dense_backward(const DenseLayer& layer, const Mat& x, const Mat& dy);
// Same, reusing the forward output y = dense_forward(layer, x).
DenseBackward dense_backward(const DenseLayer& layer, const Mat& x, const Mat& y, const Mat& dy);

// ---------------------------------------------------------------------------
// Multi-layer perceptron

struct MlpGrads {
  std::vector<DenseGrads> layers;

  void collect(ParamList& out, const std::string& prefix);
};

struct MlpCache {
  std::vector<Mat> activations;  // activations[0] = input, back() = output
  const Mat& output() const { return activations.back(); }
};

struct Mlp {
  std::vector<DenseLayer> layers;

  // Hidden layers use `hidden_act`, the last layer `output_act`.
  static Mlp init(int in_dim, const std::vector<int>& hidden, int out_dim, Activation hidden_act,
                  Activation output_act, Rng& rng);

  int in_dim() const { return layers.front().in_dim(); }
  int out_dim() const { return layers.back().out_dim(); }

  Mat forward(const Mat& x) const;
  MlpCache forward_cached(const Mat& x) const;

  struct Backward {
    Mat dx;
    MlpGrads grads;
  };
  Backward backward(const MlpCache& cache, const Mat& dy) const;
  // Input gradient only; skips the parameter gradient products.
  Mat backward_input(const MlpCache& cache, const Mat& dy) const;

  MlpGrads zero_grads() const;
  void collect(ParamList& out, const std::string& prefix);
};

// ---------------------------------------------------------------------------
// LSTM

struct LstmGrads {
  Mat w_input;
  Mat w_hidden;
  Vec bias;

  void collect(ParamList& out, const std::string& prefix);
};

// Gate rows are stacked [input; forget; candidate; output], each hidden_dim tall.
struct LstmCell {
  Mat w_input;   // 4H x I
  Mat w_hidden;  // 4H x H
  Vec bias;      // 4H

  // Uniform(+-1/sqrt(fan_in)) weights, zero bias except forget gate = +1.
  static LstmCell init(int input_dim, int hidden_dim, Rng& rng);

  int input_dim() const { return static_cast<int>(w_input.cols()); }
  int hidden_dim() const { return static_cast<int>(w_hidden.cols()); }
  LstmGrads zero_grads() const;
  void collect(ParamList& out, const std::string& prefix);
};

struct LstmCache {
  std::vector<Mat> inputs;
  std::vector<Mat> gate_i, gate_f, gate_g, gate_o;
  std::vector<Mat> cell;    // cell[0] = c_0 = 0, cell[t+1] after step t
  std::vector<Mat> hidden;  // hidden[0] = h_0 = 0

  const Mat& final_hidden() const { return hidden.back(); }
};

// Runs the recurrence from zero state over `sequence` (each element input_dim x batch).
LstmCache lstm_forward(const LstmCell& cell, std::span<const Mat> sequence);
// Single-sample convenience: returns h_T.
Vec lstm_forward(const LstmCell& cell, const std::vector<Vec>& sequence);

struct LstmBackward {
  LstmGrads grads;
  std::vector<Mat> dinputs;
};

// Backpropagation through time from a gradient on the final hidden state.
LstmBackward lstm_backward(const LstmCell& cell, const LstmCache& cache, const Mat& dh_final);

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Vec> first_moment;
  std::vector<Vec> second_moment;

  explicit AdamState(double lr = 1e-3) : learning_rate(lr) {}
};

// One bias-corrected Adam update. Throws std::runtime_error naming the block
// if any gradient is non-finite; nothing is modified in that case.
void adam_step(AdamState& state, const ParamList& params, const ParamList& grads);

}  // namespace acdc::nn

namespace acdc::nn {

// Forward pass without keeping intermediate activations; returns h_T.
Mat lstm_final_hidden(const LstmCell& cell, std::span<const Mat> sequence);

}  // namespace acdc::nn
