#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "acdc/curriculum.hpp"
#include "acdc/nn.hpp"
#include "acdc/replay.hpp"

namespace acdc::contrastive {

struct ContrastivePairSet {
  std::vector<std::int64_t> positives;  // episode ids, best F first
  std::vector<std::int64_t> negatives;  // episode ids, worst F last
  double lambda_used = 0.0;
};

// Top ceil(tau_p N) trajectories by F become positives, bottom ceil(tau_n N)
// negatives. Ties rank the newer trajectory higher. When the two counts
// would overlap (odd N), negatives shrink so the sets stay disjoint.
ContrastivePairSet select_pairs(std::span<const curriculum::TrajectoryScore> scores, double tau_p,
                                double tau_n);

// Indices floor(i * T / (count - 1)) for i = 0 .. count-1.
std::vector<int> key_frame_indices(int horizon, int count = 5);
std::vector<Vec> extract_key_frames(const replay::Trajectory& trajectory, int count = 5);

struct EncoderConfig {
  int goal_dim = 2;
  int lstm_hidden = 64;
  int lambda_embed = 8;
  int z_dim = 32;
  int key_frames = 5;
  bool raw_lambda = false;  // feed lambda itself instead of log(1 + lambda)
  double alpha_temp = 0.1;
  double beta_norm = 1.0;
  double margin = 0.5;
  double learning_rate = 1e-3;

  void validate() const;
};

// z = W_f [LSTM(key frames); W_l * lambda_feature + b_l] + b_f
struct EncoderNet {
  EncoderConfig config;
  nn::LstmCell lstm;
  nn::DenseLayer lambda_embed;  // 1 -> lambda_embed, affine
  nn::DenseLayer fusion;        // lstm_hidden + lambda_embed -> z_dim, affine

  static EncoderNet init(const EncoderConfig& config, Rng& rng);

  double lambda_feature(double lambda) const;
  void collect(nn::ParamList& out, const std::string& prefix = "encoder");
};

struct EncoderGrads {
  nn::LstmGrads lstm;
  nn::DenseGrads lambda_embed;
  nn::DenseGrads fusion;

  void collect(nn::ParamList& out, const std::string& prefix = "encoder");
};

struct TrajectoryEncoding {
  Vec z;
  double norm = 0.0;
  double lambda_used = 0.0;
};

TrajectoryEncoding encode(const EncoderNet& net, const replay::Trajectory& trajectory, double lambda);

// Encodes every trajectory under one lambda; column b is trajectory b.
Mat encode_batch(const EncoderNet& net, std::span<const replay::Trajectory* const> trajectories,
                 double lambda);

// Loss value with its gradient w.r.t. each encoding column.
struct LossGrad {
  double value = 0.0;
  Mat grad_pos;
  Mat grad_neg;
};

// Self-anchored InfoNCE over L2-normalized encodings (columns). Each positive
// is contrasted against every positive and negative, itself included.
double contrastive_loss(const Mat& pos, const Mat& neg, double alpha_temp);
LossGrad contrastive_loss_grad(const Mat& pos, const Mat& neg, double alpha_temp);

// Hinge max(0, mu_N - mu_P + margin) on mean raw L2 norms.
double norm_loss(const Mat& pos, const Mat& neg, double margin);
LossGrad norm_loss_grad(const Mat& pos, const Mat& neg, double margin);

struct TotalLoss {
  double total = 0.0;
  double contrastive = 0.0;
  double norm = 0.0;
  double mu_pos = 0.0;
  double mu_neg = 0.0;
  Mat grad_pos;
  Mat grad_neg;
};

// contrastive + beta_norm * norm, with gradients of the total.
TotalLoss total_loss(const Mat& pos, const Mat& neg, double alpha_temp, double beta_norm,
                     double margin);

// Full encoder loss and parameter gradients for one pair set.
struct EncoderLoss {
  TotalLoss loss;
  EncoderGrads grads;
};
EncoderLoss encoder_loss(const EncoderNet& net, std::span<const replay::Trajectory* const> positives,
                         std::span<const replay::Trajectory* const> negatives, double lambda);

struct TrainTrace {
  std::vector<double> losses;
  double mu_pos = 0.0;  // from the last step's forward pass
  double mu_neg = 0.0;
};

// `steps` Adam updates of total_loss over the given trajectories.
TrainTrace train_encoder(EncoderNet& net, nn::AdamState& adam,
                         std::span<const replay::Trajectory* const> positives,
                         std::span<const replay::Trajectory* const> negatives, double lambda,
                         int steps);
// Resolves the pair set's episode ids against the buffer first.
TrainTrace train_encoder(EncoderNet& net, nn::AdamState& adam, const replay::ReplayBuffer& buffer,
                         const ContrastivePairSet& pairs, double lambda, int steps);

// P(tau) = |z_tau| / sum |z|; all-zero norms fall back to uniform with a warning.
std::vector<double> probabilities_from_norms(std::span<const double> norms);
std::vector<double> encoding_norms(const EncoderNet& net, const replay::ReplayBuffer& buffer,
                                   double lambda);
std::vector<double> sampling_probabilities(const EncoderNet& net, const replay::ReplayBuffer& buffer,
                                           double lambda);

}  // namespace acdc::contrastive
