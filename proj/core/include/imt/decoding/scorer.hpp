#pragma once

#include "imt/model/seq2seq.hpp"

#include <span>
#include <vector>

namespace imt {

class RevisionMemory;

/// Decoder state after consuming a token, plus the log-distribution over the
/// next outcome.
struct Cursor {
  DecoderState state;
  Vec log_probs;
};

/// One decoding direction viewed as a left-to-right token scorer.
///
/// Outcomes are the vocabulary ids [0, vocab_size()) followed by extended ids
/// for out-of-vocabulary surfaces (copied from memory or pinned by a human).
/// Extended ids are fed back to the decoder as UNK.
class StepScorer {
 public:
  virtual ~StepScorer() = default;

  virtual Direction direction() const = 0;
  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t outcome_count() const = 0;
  /// Cursor after consuming the direction's start token.
  virtual Cursor start() const = 0;
  virtual Cursor advance(const Cursor& from, TokenId token) const = 0;

  TokenId start_token() const { return imt::start_token(direction()); }
  TokenId end_token() const { return imt::end_token(direction()); }

  /// Log-probability of emitting `token` freely (search expansions).
  double free_log_prob(const Cursor& at, TokenId token) const;
  /// Log-probability charged when `token` is pinned. An out-of-vocabulary
  /// pin also collects the UNK mass, since the model can only express it as UNK.
  double forced_log_prob(const Cursor& at, TokenId token) const;
  /// Whether search may propose `token` on its own.
  bool emittable(TokenId token) const;

  /// Cursor after consuming `tokens` from the start; `score` receives their
  /// summed forced log-probabilities when non-null.
  Cursor prime(std::span<const TokenId> tokens, double* score = nullptr) const;
  /// Sum of forced log-probabilities of `tokens` followed by the end token.
  double sequence_score(std::span<const TokenId> tokens) const;
};

/// Scorer backed by the seq2seq model, optionally mixing in the revision
/// memory's copy distribution (forward direction only).
class ModelScorer final : public StepScorer {
 public:
  ModelScorer(const Seq2Seq& model, const Annotations& annotations, Direction direction,
              std::size_t extended_count = 0, const RevisionMemory* memory = nullptr);

  Direction direction() const override { return direction_; }
  std::size_t vocab_size() const override { return model_.config().tgt_vocab; }
  std::size_t outcome_count() const override { return vocab_size() + extended_count_; }
  Cursor start() const override;
  Cursor advance(const Cursor& from, TokenId token) const override;

  bool memory_active() const { return memory_ != nullptr; }

 private:
  Cursor finish(StepOutput step) const;

  const Seq2Seq& model_;
  const Annotations& annotations_;
  Direction direction_;
  std::size_t extended_count_;
  const RevisionMemory* memory_;
};

}  // namespace imt
