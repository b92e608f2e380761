#pragma once

// Loss, gradients, Adam with domain projection, and the training loop shared
// by hybrid and classical networks.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hybridnn/datagen.hpp"
#include "hybridnn/network.hpp"

namespace hybridnn {

inline constexpr double kLogEpsilon = 1e-12;

/// -sum_k y_k log(p_k + 1e-12).
double cross_entropy_loss(const Eigen::VectorXd& probabilities, const Eigen::VectorXd& one_hot);
double cross_entropy_loss(const Eigen::VectorXd& probabilities, int label);

/// lambda * sum |amplitude| over the squeezing and displacement amplitudes of
/// the quantum layers. Zero for classical networks.
double l1_amplitude_penalty(const Network& network, double lambda);

struct LossGradient {
  double loss = 0.0;  // mean cross entropy over the batch plus penalty
  Eigen::VectorXd gradient;
};

/// Reverse-mode gradient of mean batch loss + L1 penalty with respect to
/// flat_params(network). Throws ErrorKind::numerical on a non-finite loss.
LossGradient loss_and_gradient(const Network& network, const SampleSet& data,
                               std::span<const std::size_t> batch, double l1_lambda);

/// Forward-only value of the same objective.
double batch_objective(const Network& network, const SampleSet& data,
                       std::span<const std::size_t> batch, double l1_lambda);

struct GradientReport {
  long index = 0;
  double analytic = 0.0;
  double finite_difference = 0.0;
  double relative_error = 0.0;  // |a - fd| / max(|fd|, 1e-8)
};

/// Compares loss_and_gradient against central differences of
/// batch_objective, one report per parameter.
std::vector<GradientReport> gradient_check(const Network& network, const SampleSet& data,
                                           std::span<const std::size_t> batch, double l1_lambda,
                                           double step = 1e-4);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long t = 0;

  static AdamState zeros(Eigen::Index n);
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One Adam update (t is incremented first), then project_params.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state,
               const AdamConfig& config, std::span<const ParamInfo> layout, double a_max);

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int epochs = 200;
  double l1_amplitude_weight = 1e-3;
  std::uint64_t seed = 0;
  int cutoff = 7;
  double a_max = 0.0;  // hybrid only; filled from calibration by callers

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
  double train_loss = 0.0;  // mean objective over the epoch's updates
};

struct TrainResult {
  Network final_network;
  Network best_network;
  int best_epoch = 0;
  double best_validation_accuracy = 0.0;
  std::vector<EpochRecord> history;
  int updates_per_epoch = 0;
  long total_updates = 0;
  AdamState optimizer;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// ceil(train_size / batch_size).
int updates_per_epoch(std::size_t train_size, int batch_size);

/// Mini-batch training with a seeded shuffle per epoch ("shuffle" stream of
/// config.seed). Accuracies are recorded after every epoch; the best
/// validation epoch (earliest on ties) is returned alongside the final state.
TrainResult train(Network network, const Dataset& dataset, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Fraction of samples whose argmax probability (lowest index on ties)
/// matches the label.
double accuracy(const Network& network, const SampleSet& samples);

/// argmax with ties to the lowest index.
int predicted_class(const Eigen::VectorXd& probabilities);

}  // namespace hybridnn
