#include "acdc/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace acdc::nn {

void append_block(ParamList& out, const std::string& name, Mat& m) {
  out.push_back(ParamBlock{name, m.data(), m.rows(), m.cols()});
}

void append_block(ParamList& out, const std::string& name, Vec& v) {
  out.push_back(ParamBlock{name, v.data(), v.size(), 1});
}

namespace {

Mat uniform_matrix(int rows, int cols, double limit, Rng& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  Mat m(rows, cols);
  // Column-major fill order keeps initialization independent of Eigen internals.
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = dist(rng);
  }
  return m;
}

void apply_activation(Activation act, Mat& z) {
  switch (act) {
    case Activation::identity: break;
    case Activation::relu: z = z.cwiseMax(0.0); break;
    case Activation::tanh: z = z.array().tanh().matrix(); break;
  }
}

// dz = dy .* act'(z), expressed through the activation output y.
Mat activation_backward(Activation act, const Mat& y, const Mat& dy) {
  switch (act) {
    case Activation::identity: return dy;
    case Activation::relu: return (y.array() > 0.0).select(dy, 0.0);
    case Activation::tanh: return (dy.array() * (1.0 - y.array().square())).matrix();
  }
  return dy;
}

void check_input(const DenseLayer& layer, const Mat& x) {
  if (x.rows() != layer.in_dim()) {
    throw std::invalid_argument("dense: input has " + std::to_string(x.rows()) +
                                " rows, layer expects " + std::to_string(layer.in_dim()));
  }
}

Mat sigmoid(const Mat& z) { return (1.0 / (1.0 + (-z.array()).exp())).matrix(); }

}  // namespace

// ---------------------------------------------------------------------------

void DenseGrads::collect(ParamList& out, const std::string& prefix) {
  append_block(out, prefix + ".weights", weights);
  append_block(out, prefix + ".bias", bias);
}

DenseLayer DenseLayer::init(int in_dim, int out_dim, Activation activation, Rng& rng) {
  if (in_dim <= 0 || out_dim <= 0) throw std::invalid_argument("DenseLayer: bad dimensions");
  DenseLayer layer;
  layer.weights = uniform_matrix(out_dim, in_dim, 1.0 / std::sqrt(static_cast<double>(in_dim)), rng);
  layer.bias = Vec::Zero(out_dim);
  layer.activation = activation;
  return layer;
}

DenseGrads DenseLayer::zero_grads() const {
  return DenseGrads{Mat::Zero(weights.rows(), weights.cols()), Vec::Zero(bias.size())};
}

void DenseLayer::collect(ParamList& out, const std::string& prefix) {
  append_block(out, prefix + ".weights", weights);
  append_block(out, prefix + ".bias", bias);
}

Mat dense_forward(const DenseLayer& layer, const Mat& x) {
  check_input(layer, x);
  Mat z = layer.weights * x;
  z.colwise() += layer.bias;
  apply_activation(layer.activation, z);
  return z;
}

DenseBackward dense_backward(const DenseLayer& layer, const Mat& x, const Mat& dy) {
  return dense_backward(layer, x, dense_forward(layer, x), dy);
}

DenseBackward dense_backward(const DenseLayer& layer, const Mat& x, const Mat& y, const Mat& dy) {
  check_input(layer, x);
  if (dy.rows() != layer.out_dim() || dy.cols() != x.cols()) {
    throw std::invalid_argument("dense_backward: output gradient shape mismatch");
  }
  const Mat dz = activation_backward(layer.activation, y, dy);
  DenseBackward out;
  out.grads.weights = dz * x.transpose();
  out.grads.bias = dz.rowwise().sum();
  out.dx = layer.weights.transpose() * dz;
  return out;
}

// ---------------------------------------------------------------------------

void MlpGrads::collect(ParamList& out, const std::string& prefix) {
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(out, prefix + "." + std::to_string(i));
}

Mlp Mlp::init(int in_dim, const std::vector<int>& hidden, int out_dim, Activation hidden_act,
              Activation output_act, Rng& rng) {
  Mlp net;
  int prev = in_dim;
  for (int width : hidden) {
    net.layers.push_back(DenseLayer::init(prev, width, hidden_act, rng));
    prev = width;
  }
  net.layers.push_back(DenseLayer::init(prev, out_dim, output_act, rng));
  return net;
}

Mat Mlp::forward(const Mat& x) const {
  Mat a = x;
  for (const auto& layer : layers) a = dense_forward(layer, a);
  return a;
}

MlpCache Mlp::forward_cached(const Mat& x) const {
  MlpCache cache;
  cache.activations.reserve(layers.size() + 1);
  cache.activations.push_back(x);
  for (const auto& layer : layers) cache.activations.push_back(dense_forward(layer, cache.activations.back()));
  return cache;
}

Mlp::Backward Mlp::backward(const MlpCache& cache, const Mat& dy) const {
  Backward out;
  out.grads.layers.resize(layers.size());
  Mat grad = dy;
  for (std::size_t i = layers.size(); i-- > 0;) {
    auto step = dense_backward(layers[i], cache.activations[i], cache.activations[i + 1], grad);
    out.grads.layers[i] = std::move(step.grads);
    grad = std::move(step.dx);
  }
  out.dx = std::move(grad);
  return out;
}

Mat Mlp::backward_input(const MlpCache& cache, const Mat& dy) const {
  Mat grad = dy;
  for (std::size_t i = layers.size(); i-- > 0;) {
    const Mat dz = activation_backward(layers[i].activation, cache.activations[i + 1], grad);
    grad = layers[i].weights.transpose() * dz;
  }
  return grad;
}

MlpGrads Mlp::zero_grads() const {
  MlpGrads g;
  for (const auto& layer : layers) g.layers.push_back(layer.zero_grads());
  return g;
}

void Mlp::collect(ParamList& out, const std::string& prefix) {
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(out, prefix + "." + std::to_string(i));
}

// ---------------------------------------------------------------------------

void LstmGrads::collect(ParamList& out, const std::string& prefix) {
  append_block(out, prefix + ".w_input", w_input);
  append_block(out, prefix + ".w_hidden", w_hidden);
  append_block(out, prefix + ".bias", bias);
}

LstmCell LstmCell::init(int input_dim, int hidden_dim, Rng& rng) {
  if (input_dim <= 0 || hidden_dim <= 0) throw std::invalid_argument("LstmCell: bad dimensions");
  LstmCell cell;
  cell.w_input = uniform_matrix(4 * hidden_dim, input_dim, 1.0 / std::sqrt(static_cast<double>(input_dim)), rng);
  cell.w_hidden =
      uniform_matrix(4 * hidden_dim, hidden_dim, 1.0 / std::sqrt(static_cast<double>(hidden_dim)), rng);
  cell.bias = Vec::Zero(4 * hidden_dim);
  cell.bias.segment(hidden_dim, hidden_dim).setOnes();
  return cell;
}

LstmGrads LstmCell::zero_grads() const {
  return LstmGrads{Mat::Zero(w_input.rows(), w_input.cols()),
                   Mat::Zero(w_hidden.rows(), w_hidden.cols()), Vec::Zero(bias.size())};
}

void LstmCell::collect(ParamList& out, const std::string& prefix) {
  append_block(out, prefix + ".w_input", w_input);
  append_block(out, prefix + ".w_hidden", w_hidden);
  append_block(out, prefix + ".bias", bias);
}

LstmCache lstm_forward(const LstmCell& cell, std::span<const Mat> sequence) {
  if (sequence.empty()) throw std::invalid_argument("lstm_forward: empty sequence");
  const int h = cell.hidden_dim();
  const Eigen::Index batch = sequence.front().cols();
  LstmCache cache;
  cache.cell.push_back(Mat::Zero(h, batch));
  cache.hidden.push_back(Mat::Zero(h, batch));
  for (const Mat& x : sequence) {
    if (x.rows() != cell.input_dim() || x.cols() != batch) {
      throw std::invalid_argument("lstm_forward: inconsistent input shape");
    }
    Mat a = cell.w_input * x + cell.w_hidden * cache.hidden.back();
    a.colwise() += cell.bias;
    Mat i = sigmoid(a.middleRows(0, h));
    Mat f = sigmoid(a.middleRows(h, h));
    Mat g = a.middleRows(2 * h, h).array().tanh().matrix();
    Mat o = sigmoid(a.middleRows(3 * h, h));
    Mat c = (f.array() * cache.cell.back().array() + i.array() * g.array()).matrix();
    Mat hn = (o.array() * c.array().tanh()).matrix();
    cache.inputs.push_back(x);
    cache.gate_i.push_back(std::move(i));
    cache.gate_f.push_back(std::move(f));
    cache.gate_g.push_back(std::move(g));
    cache.gate_o.push_back(std::move(o));
    cache.cell.push_back(std::move(c));
    cache.hidden.push_back(std::move(hn));
  }
  return cache;
}

Mat lstm_final_hidden(const LstmCell& cell, std::span<const Mat> sequence) {
  if (sequence.empty()) throw std::invalid_argument("lstm_forward: empty sequence");
  const int h = cell.hidden_dim();
  const Eigen::Index batch = sequence.front().cols();
  Mat c = Mat::Zero(h, batch);
  Mat hidden = Mat::Zero(h, batch);
  Mat a(4 * h, batch);
  for (const Mat& x : sequence) {
    if (x.rows() != cell.input_dim() || x.cols() != batch) {
      throw std::invalid_argument("lstm_forward: inconsistent input shape");
    }
    a.noalias() = cell.w_input * x;
    a.noalias() += cell.w_hidden * hidden;
    a.colwise() += cell.bias;
    const Mat i = sigmoid(a.middleRows(0, h));
    const Mat f = sigmoid(a.middleRows(h, h));
    const Mat o = sigmoid(a.middleRows(3 * h, h));
    c = (f.array() * c.array() + i.array() * a.middleRows(2 * h, h).array().tanh()).matrix();
    hidden = (o.array() * c.array().tanh()).matrix();
  }
  return hidden;
}

Vec lstm_forward(const LstmCell& cell, const std::vector<Vec>& sequence) {
  std::vector<Mat> seq(sequence.begin(), sequence.end());
  return lstm_forward(cell, seq).final_hidden().col(0);
}

LstmBackward lstm_backward(const LstmCell& cell, const LstmCache& cache, const Mat& dh_final) {
  const int h = cell.hidden_dim();
  const std::size_t steps = cache.inputs.size();
  if (dh_final.rows() != h || dh_final.cols() != cache.hidden.back().cols()) {
    throw std::invalid_argument("lstm_backward: gradient shape mismatch");
  }
  LstmBackward out;
  out.grads = cell.zero_grads();
  out.dinputs.resize(steps);

  Mat dh = dh_final;
  Mat dc = Mat::Zero(h, dh.cols());
  Mat da(4 * h, dh.cols());
  for (std::size_t t = steps; t-- > 0;) {
    const auto& i = cache.gate_i[t].array();
    const auto& f = cache.gate_f[t].array();
    const auto& g = cache.gate_g[t].array();
    const auto& o = cache.gate_o[t].array();
    const Eigen::ArrayXXd tc = cache.cell[t + 1].array().tanh();

    dc.array() += dh.array() * o * (1.0 - tc.square());
    da.middleRows(0, h) = (dc.array() * g * i * (1.0 - i)).matrix();
    da.middleRows(h, h) = (dc.array() * cache.cell[t].array() * f * (1.0 - f)).matrix();
    da.middleRows(2 * h, h) = (dc.array() * i * (1.0 - g.square())).matrix();
    da.middleRows(3 * h, h) = (dh.array() * tc * o * (1.0 - o)).matrix();

    out.grads.w_input.noalias() += da * cache.inputs[t].transpose();
    out.grads.w_hidden.noalias() += da * cache.hidden[t].transpose();
    out.grads.bias += da.rowwise().sum();
    out.dinputs[t] = cell.w_input.transpose() * da;
    dh = cell.w_hidden.transpose() * da;
    dc = (dc.array() * f).matrix();
  }
  return out;
}

// ---------------------------------------------------------------------------

void adam_step(AdamState& state, const ParamList& params, const ParamList& grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: block count mismatch");
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].rows != grads[b].rows || params[b].cols != grads[b].cols) {
      throw std::invalid_argument("adam_step: shape mismatch for block " + params[b].name);
    }
    if (!grads[b].map().allFinite()) {
      throw std::runtime_error("adam_step: non-finite gradient in block " + params[b].name);
    }
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.push_back(Vec::Zero(p.size()));
      state.second_moment.push_back(Vec::Zero(p.size()));
    }
  } else if (state.first_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter layout changed between steps");
  }

  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t b = 0; b < params.size(); ++b) {
    Eigen::Map<Vec> p(params[b].data, params[b].size());
    Eigen::Map<const Vec> g(grads[b].data, grads[b].size());
    Vec& m = state.first_moment[b];
    Vec& v = state.second_moment[b];
    if (m.size() != p.size()) throw std::invalid_argument("adam_step: moment shape mismatch");
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseAbs2();
    p.array() -= state.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.eps);
  }
}

}  // namespace acdc::nn
