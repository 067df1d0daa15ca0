#include "imt/model/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace imt {

TrainingReport train(Seq2Seq& model, std::span<const TrainingPair> pairs, const TrainingConfig& config) {
  if (pairs.empty()) throw std::invalid_argument("train: empty corpus");
  if (config.batch_size == 0) throw std::invalid_argument("train: batch size must be positive");
  for (const auto& p : pairs) {
    if (p.source.empty() || p.target.empty()) throw std::invalid_argument("train: empty sentence in corpus");
  }
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  ParamStore& params = model.params();
  params.zero_grad();

  TrainingReport report;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const double weight = 1.0 / static_cast<double>(end - begin);
      for (std::size_t k = begin; k < end; ++k) {
        const auto& pair = pairs[order[k]];
        const double loss = model.joint_loss_and_grad(pair.source, pair.target, weight);
        if (!std::isfinite(loss)) {
          throw TrainingDiverged("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", pair " + std::to_string(order[k]));
        }
        total += loss;
      }
      const double norm = params.grad_norm();
      if (!std::isfinite(norm)) {
        throw TrainingDiverged("training diverged: non-finite gradient at epoch " + std::to_string(epoch));
      }
      if (config.clip_norm > 0.0 && norm > config.clip_norm) params.scale_grad(config.clip_norm / norm);
      adam_step(params, config.learning_rate);
      ++report.updates;
    }
    const double mean = total / static_cast<double>(pairs.size());
    report.loss_curve.push_back(mean);
    if (config.on_epoch) config.on_epoch(epoch, mean);
  }
  if (!params.all_finite()) throw TrainingDiverged("training diverged: non-finite parameters");
  return report;
}

double token_accuracy(const Seq2Seq& model, std::span<const TrainingPair> pairs, Direction direction) {
  std::size_t correct = 0, total = 0;
  for (const auto& pair : pairs) {
    const Annotations ann = model.encode(pair.source);
    std::vector<TokenId> seq = pair.target;
    if (direction == Direction::kBackward) std::reverse(seq.begin(), seq.end());
    const auto steps = model.teacher_force(direction, ann, seq);
    for (std::size_t j = 0; j < steps.size(); ++j) {
      const TokenId gold = j < seq.size() ? seq[j] : end_token(direction);
      Eigen::Index best = 0;
      steps[j].logits.maxCoeff(&best);
      correct += static_cast<TokenId>(best) == gold ? 1 : 0;
      ++total;
    }
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

double mean_joint_loss(const Seq2Seq& model, std::span<const TrainingPair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("mean_joint_loss: no pairs");
  double total = 0.0;
  for (const auto& p : pairs) total += model.joint_loss(p.source, p.target);
  return total / static_cast<double>(pairs.size());
}

}  // namespace imt
