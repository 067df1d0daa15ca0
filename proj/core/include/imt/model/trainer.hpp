#pragma once

#include "imt/model/seq2seq.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace imt {

struct TrainingPair {
  std::vector<TokenId> source;
  std::vector<TokenId> target;
};

struct TrainingConfig {
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  double learning_rate = 2e-3;
  double clip_norm = 5.0;  // global gradient norm; 0 disables clipping
  std::uint64_t seed = 1;  // shuffling order
  /// Called after every epoch with (epoch index, mean joint loss).
  std::function<void(std::size_t, double)> on_epoch;
};

struct TrainingReport {
  std::vector<double> loss_curve;  // mean joint loss per epoch
  std::size_t updates = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Minibatch Adam on the joint forward/backward loss. Deterministic in the
/// model's initial parameters and `config.seed`. Throws TrainingDiverged when
/// a loss or gradient becomes non-finite.
TrainingReport train(Seq2Seq& model, std::span<const TrainingPair> pairs, const TrainingConfig& config);

/// Teacher-forced argmax accuracy of one decoder over all target tokens and
/// the terminal symbol.
double token_accuracy(const Seq2Seq& model, std::span<const TrainingPair> pairs,
                      Direction direction = Direction::kForward);

/// Mean joint loss over `pairs`.
double mean_joint_loss(const Seq2Seq& model, std::span<const TrainingPair> pairs);

}  // namespace imt
