#include "acdc/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "acdc/log.hpp"

namespace acdc::contrastive {

ContrastivePairSet select_pairs(std::span<const curriculum::TrajectoryScore> scores, double tau_p,
                                double tau_n) {
  const auto n = scores.size();
  if (n < 2) throw std::invalid_argument("select_pairs: need at least 2 trajectories");
  if (!(tau_p > 0.0) || !(tau_n > 0.0)) throw std::invalid_argument("select_pairs: tau must be > 0");
  if (tau_p + tau_n > 1.0 + 1e-12) throw std::invalid_argument("select_pairs: tau_p + tau_n > 1");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a].F != scores[b].F) return scores[a].F > scores[b].F;
    return scores[a].sequence > scores[b].sequence;
  });

  const auto count = [n](double tau) {
    // Guard against 0.3 * 10 landing a hair above 3.
    return static_cast<std::size_t>(std::ceil(tau * static_cast<double>(n) - 1e-9));
  };
  const std::size_t n_pos = std::min(count(tau_p), n - 1);
  const std::size_t n_neg = std::max<std::size_t>(1, std::min(count(tau_n), n - n_pos));

  ContrastivePairSet out;
  out.lambda_used = scores.front().lambda_used;
  for (std::size_t i = 0; i < n_pos; ++i) out.positives.push_back(scores[order[i]].episode_id);
  for (std::size_t i = n - n_neg; i < n; ++i) out.negatives.push_back(scores[order[i]].episode_id);
  return out;
}

std::vector<int> key_frame_indices(int horizon, int count) {
  if (horizon < 1) throw std::invalid_argument("key_frame_indices: horizon must be >= 1");
  if (count < 2) throw std::invalid_argument("key_frame_indices: need at least 2 frames");
  std::vector<int> idx(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    idx[static_cast<std::size_t>(i)] =
        static_cast<int>((static_cast<long long>(i) * horizon) / (count - 1));
  }
  return idx;
}

std::vector<Vec> extract_key_frames(const replay::Trajectory& trajectory, int count) {
  std::vector<Vec> frames;
  for (int i : key_frame_indices(trajectory.horizon(), count)) {
    frames.push_back(trajectory.achieved_goals.at(static_cast<std::size_t>(i)));
  }
  return frames;
}

// ---------------------------------------------------------------------------

void EncoderConfig::validate() const {
  if (goal_dim <= 0 || lstm_hidden <= 0 || lambda_embed <= 0 || z_dim <= 0) {
    throw std::invalid_argument("encoder: dimensions must be positive");
  }
  if (key_frames < 2) throw std::invalid_argument("encoder: key_frames must be >= 2");
  if (!(alpha_temp > 0.0)) throw std::invalid_argument("encoder: alpha_temp must be > 0");
  if (beta_norm < 0.0) throw std::invalid_argument("encoder: beta_norm must be >= 0");
  if (margin < 0.0) throw std::invalid_argument("encoder: margin must be >= 0");
  if (learning_rate < 0.0) throw std::invalid_argument("encoder: learning rate must be >= 0");
}

EncoderNet EncoderNet::init(const EncoderConfig& config, Rng& rng) {
  config.validate();
  EncoderNet net;
  net.config = config;
  net.lstm = nn::LstmCell::init(config.goal_dim, config.lstm_hidden, rng);
  net.lambda_embed = nn::DenseLayer::init(1, config.lambda_embed, nn::Activation::identity, rng);
  net.fusion = nn::DenseLayer::init(config.lstm_hidden + config.lambda_embed, config.z_dim,
                                    nn::Activation::identity, rng);
  return net;
}

double EncoderNet::lambda_feature(double lambda) const {
  return config.raw_lambda ? lambda : std::log1p(lambda);
}

void EncoderNet::collect(nn::ParamList& out, const std::string& prefix) {
  lstm.collect(out, prefix + ".lstm");
  lambda_embed.collect(out, prefix + ".lambda_embed");
  fusion.collect(out, prefix + ".fusion");
}

void EncoderGrads::collect(nn::ParamList& out, const std::string& prefix) {
  lstm.collect(out, prefix + ".lstm");
  lambda_embed.collect(out, prefix + ".lambda_embed");
  fusion.collect(out, prefix + ".fusion");
}

namespace {

std::vector<Mat> frame_batch(const EncoderNet& net,
                             std::span<const replay::Trajectory* const> trajectories) {
  const auto batch = static_cast<Eigen::Index>(trajectories.size());
  const int horizon = trajectories.front()->horizon();
  const auto idx = key_frame_indices(horizon, net.config.key_frames);
  std::vector<Mat> frames(idx.size(), Mat(net.config.goal_dim, batch));
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto* tr = trajectories[static_cast<std::size_t>(b)];
    if (tr->horizon() != horizon) throw std::invalid_argument("encoder: mixed trajectory lengths");
    for (std::size_t k = 0; k < idx.size(); ++k) {
      frames[k].col(b) = tr->achieved_goals[static_cast<std::size_t>(idx[k])];
    }
  }
  return frames;
}

Mat fuse(const EncoderNet& net, const Mat& h_traj, double lambda) {
  const Mat lam = Mat::Constant(1, h_traj.cols(), net.lambda_feature(lambda));
  const Mat h_lambda = nn::dense_forward(net.lambda_embed, lam);
  Mat joint(h_traj.rows() + h_lambda.rows(), h_traj.cols());
  joint << h_traj, h_lambda;
  return joint;
}

Vec column_norms(const Mat& z) { return z.colwise().norm().transpose(); }

void check_nonzero(const Vec& norms, const char* which) {
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    if (!(norms(i) > 0.0)) {
      throw std::runtime_error(std::string("contrastive_loss: zero-norm ") + which +
                               " encoding (encoder collapse) at index " + std::to_string(i));
    }
  }
}

}  // namespace

Mat encode_batch(const EncoderNet& net, std::span<const replay::Trajectory* const> trajectories,
                 double lambda) {
  if (trajectories.empty()) return Mat(net.config.z_dim, 0);
  const auto frames = frame_batch(net, trajectories);
  const Mat h_traj = nn::lstm_final_hidden(net.lstm, frames);
  return nn::dense_forward(net.fusion, fuse(net, h_traj, lambda));
}

TrajectoryEncoding encode(const EncoderNet& net, const replay::Trajectory& trajectory, double lambda) {
  if (!std::isfinite(lambda)) throw std::invalid_argument("encode: lambda must be finite");
  const replay::Trajectory* one[] = {&trajectory};
  TrajectoryEncoding out;
  out.z = encode_batch(net, one, lambda).col(0);
  out.norm = out.z.norm();
  out.lambda_used = lambda;
  return out;
}

// ---------------------------------------------------------------------------

LossGrad contrastive_loss_grad(const Mat& pos, const Mat& neg, double alpha_temp) {
  if (pos.cols() < 1) throw std::invalid_argument("contrastive_loss: need at least one positive");
  if (!(alpha_temp > 0.0)) throw std::invalid_argument("contrastive_loss: alpha_temp must be > 0");
  if (neg.cols() > 0 && neg.rows() != pos.rows()) {
    throw std::invalid_argument("contrastive_loss: encoding dimension mismatch");
  }
  const Eigen::Index p = pos.cols();
  const Eigen::Index m = p + neg.cols();
  const Vec pos_norms = column_norms(pos);
  const Vec neg_norms = column_norms(neg);
  check_nonzero(pos_norms, "positive");
  check_nonzero(neg_norms, "negative");

  Mat unit(pos.rows(), m);
  unit.leftCols(p) = pos * pos_norms.cwiseInverse().asDiagonal();
  if (neg.cols() > 0) unit.rightCols(neg.cols()) = neg * neg_norms.cwiseInverse().asDiagonal();

  // Similarity logits: row i = anchor positive i, column j = every sample.
  const Mat logits = unit.leftCols(p).transpose() * unit / alpha_temp;
  Mat dlogits(p, m);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < p; ++i) {
    const double row_max = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - row_max).exp().matrix();
    const double sum = e.sum();
    loss += (std::log(sum) + row_max) - logits(i, i);
    dlogits.row(i) = e / sum;
    dlogits(i, i) -= 1.0;
  }
  const double inv_p = 1.0 / static_cast<double>(p);
  loss *= inv_p;
  dlogits *= inv_p / alpha_temp;

  // logits = U_p^T U: both factors carry gradient.
  Mat dunit = unit.leftCols(p) * dlogits;
  dunit.leftCols(p) += unit * dlogits.transpose();

  // Back through z / |z|: (I - u u^T) du / |z|.
  LossGrad out;
  out.value = loss;
  const auto project = [](const Mat& u, const Mat& du, const Vec& norms) {
    const Eigen::RowVectorXd radial = (u.array() * du.array()).colwise().sum();
    Mat g = du - u * radial.asDiagonal();
    return Mat(g * norms.cwiseInverse().asDiagonal());
  };
  out.grad_pos = project(unit.leftCols(p), dunit.leftCols(p), pos_norms);
  out.grad_neg = neg.cols() > 0 ? project(unit.rightCols(neg.cols()), dunit.rightCols(neg.cols()), neg_norms)
                                : Mat(pos.rows(), 0);
  return out;
}

double contrastive_loss(const Mat& pos, const Mat& neg, double alpha_temp) {
  return contrastive_loss_grad(pos, neg, alpha_temp).value;
}

LossGrad norm_loss_grad(const Mat& pos, const Mat& neg, double margin) {
  if (pos.cols() < 1 || neg.cols() < 1) throw std::invalid_argument("norm_loss: empty encoding set");
  if (margin < 0.0) throw std::invalid_argument("norm_loss: margin must be >= 0");
  const Vec pos_norms = column_norms(pos);
  const Vec neg_norms = column_norms(neg);
  const double mu_p = pos_norms.mean();
  const double mu_n = neg_norms.mean();
  const double hinge = mu_n - mu_p + margin;

  LossGrad out;
  out.value = std::max(0.0, hinge);
  out.grad_pos = Mat::Zero(pos.rows(), pos.cols());
  out.grad_neg = Mat::Zero(neg.rows(), neg.cols());
  if (hinge > 0.0) {
    const auto unit_scaled = [](const Mat& z, const Vec& norms, double scale) {
      Mat g(z.rows(), z.cols());
      for (Eigen::Index c = 0; c < z.cols(); ++c) {
        g.col(c) = norms(c) > 0.0 ? Vec(z.col(c) * (scale / norms(c))) : Vec::Zero(z.rows());
      }
      return g;
    };
    out.grad_pos = unit_scaled(pos, pos_norms, -1.0 / static_cast<double>(pos.cols()));
    out.grad_neg = unit_scaled(neg, neg_norms, 1.0 / static_cast<double>(neg.cols()));
  }
  return out;
}

double norm_loss(const Mat& pos, const Mat& neg, double margin) {
  return norm_loss_grad(pos, neg, margin).value;
}

TotalLoss total_loss(const Mat& pos, const Mat& neg, double alpha_temp, double beta_norm,
                     double margin) {
  const auto con = contrastive_loss_grad(pos, neg, alpha_temp);
  const auto nrm = norm_loss_grad(pos, neg, margin);
  TotalLoss out;
  out.contrastive = con.value;
  out.norm = nrm.value;
  out.total = con.value + beta_norm * nrm.value;
  out.mu_pos = pos.colwise().norm().mean();
  out.mu_neg = neg.colwise().norm().mean();
  out.grad_pos = con.grad_pos + beta_norm * nrm.grad_pos;
  out.grad_neg = con.grad_neg + beta_norm * nrm.grad_neg;
  return out;
}

EncoderLoss encoder_loss(const EncoderNet& net, std::span<const replay::Trajectory* const> positives,
                         std::span<const replay::Trajectory* const> negatives, double lambda) {
  if (positives.empty() || negatives.empty()) {
    throw std::invalid_argument("encoder_loss: positives and negatives must be nonempty");
  }
  std::vector<const replay::Trajectory*> all(positives.begin(), positives.end());
  all.insert(all.end(), negatives.begin(), negatives.end());
  const auto p = static_cast<Eigen::Index>(positives.size());
  const auto n = static_cast<Eigen::Index>(negatives.size());

  const auto frames = frame_batch(net, all);
  const auto lstm_cache = nn::lstm_forward(net.lstm, frames);
  const Mat lam = Mat::Constant(1, p + n, net.lambda_feature(lambda));
  const Mat h_lambda = nn::dense_forward(net.lambda_embed, lam);
  Mat joint(net.config.lstm_hidden + net.config.lambda_embed, p + n);
  joint << lstm_cache.final_hidden(), h_lambda;
  const Mat z = nn::dense_forward(net.fusion, joint);

  EncoderLoss out;
  out.loss = total_loss(z.leftCols(p), z.rightCols(n), net.config.alpha_temp, net.config.beta_norm,
                        net.config.margin);

  Mat dz(z.rows(), p + n);
  dz << out.loss.grad_pos, out.loss.grad_neg;
  auto fusion_back = nn::dense_backward(net.fusion, joint, z, dz);
  out.grads.fusion = std::move(fusion_back.grads);
  const Mat dh_traj = fusion_back.dx.topRows(net.config.lstm_hidden);
  const Mat dh_lambda = fusion_back.dx.bottomRows(net.config.lambda_embed);
  out.grads.lambda_embed = nn::dense_backward(net.lambda_embed, lam, h_lambda, dh_lambda).grads;
  out.grads.lstm = nn::lstm_backward(net.lstm, lstm_cache, dh_traj).grads;
  return out;
}

TrainTrace train_encoder(EncoderNet& net, nn::AdamState& adam,
                         std::span<const replay::Trajectory* const> positives,
                         std::span<const replay::Trajectory* const> negatives, double lambda,
                         int steps) {
  if (steps < 0) throw std::invalid_argument("train_encoder: steps must be >= 0");
  TrainTrace trace;
  nn::ParamList params;
  net.collect(params);
  for (int s = 0; s < steps; ++s) {
    auto step = encoder_loss(net, positives, negatives, lambda);
    if (!std::isfinite(step.loss.total)) {
      std::ostringstream msg;
      msg << "train_encoder: non-finite loss at step " << s << " (contrastive=" << step.loss.contrastive
          << ", norm=" << step.loss.norm << ", mu_pos=" << step.loss.mu_pos
          << ", mu_neg=" << step.loss.mu_neg << ")";
      throw std::runtime_error(msg.str());
    }
    nn::ParamList grads;
    step.grads.collect(grads);
    nn::adam_step(adam, params, grads);
    trace.losses.push_back(step.loss.total);
    trace.mu_pos = step.loss.mu_pos;
    trace.mu_neg = step.loss.mu_neg;
  }
  return trace;
}

TrainTrace train_encoder(EncoderNet& net, nn::AdamState& adam, const replay::ReplayBuffer& buffer,
                         const ContrastivePairSet& pairs, double lambda, int steps) {
  if (pairs.positives.empty() || pairs.negatives.empty()) {
    throw std::invalid_argument("train_encoder: pair set must have positives and negatives");
  }
  std::vector<const replay::Trajectory*> pos;
  std::vector<const replay::Trajectory*> neg;
  for (auto id : pairs.positives) pos.push_back(&buffer.find(id));
  for (auto id : pairs.negatives) neg.push_back(&buffer.find(id));
  return train_encoder(net, adam, pos, neg, lambda, steps);
}

// ---------------------------------------------------------------------------

std::vector<double> probabilities_from_norms(std::span<const double> norms) {
  if (norms.empty()) throw std::invalid_argument("sampling_probabilities: empty buffer");
  double total = 0.0;
  for (double n : norms) {
    if (!(n >= 0.0) || !std::isfinite(n)) {
      throw std::invalid_argument("sampling_probabilities: norms must be finite and nonnegative");
    }
    total += n;
  }
  std::vector<double> probs(norms.size());
  if (total == 0.0) {
    log_warn("all encoding norms are zero (encoder collapse); falling back to uniform sampling");
    std::fill(probs.begin(), probs.end(), 1.0 / static_cast<double>(norms.size()));
    return probs;
  }
  for (std::size_t i = 0; i < norms.size(); ++i) probs[i] = norms[i] / total;
  return probs;
}

std::vector<double> encoding_norms(const EncoderNet& net, const replay::ReplayBuffer& buffer,
                                   double lambda) {
  if (buffer.empty()) throw std::invalid_argument("sampling_probabilities: empty buffer");
  constexpr std::size_t kChunk = 512;
  std::vector<double> norms;
  norms.reserve(buffer.size());
  std::vector<const replay::Trajectory*> chunk;
  for (std::size_t start = 0; start < buffer.size(); start += kChunk) {
    chunk.clear();
    for (std::size_t i = start; i < std::min(buffer.size(), start + kChunk); ++i) chunk.push_back(&buffer.at(i));
    const Mat z = encode_batch(net, chunk, lambda);
    for (Eigen::Index c = 0; c < z.cols(); ++c) norms.push_back(z.col(c).norm());
  }
  return norms;
}

std::vector<double> sampling_probabilities(const EncoderNet& net, const replay::ReplayBuffer& buffer,
                                           double lambda) {
  return probabilities_from_norms(encoding_norms(net, buffer, lambda));
}

}  // namespace acdc::contrastive
