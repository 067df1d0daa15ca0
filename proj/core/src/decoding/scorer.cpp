#include "imt/decoding/scorer.hpp"

#include "imt/math/ops.hpp"
#include "imt/memory/revision_memory.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace imt {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

bool StepScorer::emittable(TokenId token) const {
  if (token < 0 || static_cast<std::size_t>(token) >= outcome_count()) return false;
  return token != kPad && token != kBlank && token != start_token();
}

double StepScorer::free_log_prob(const Cursor& at, TokenId token) const {
  if (!emittable(token)) return kNegInf;
  return at.log_probs[token];
}

double StepScorer::forced_log_prob(const Cursor& at, TokenId token) const {
  if (token < 0 || static_cast<std::size_t>(token) >= outcome_count()) {
    throw std::out_of_range("scorer: token " + std::to_string(token) + " outside outcomes");
  }
  if (static_cast<std::size_t>(token) < vocab_size()) return at.log_probs[token];
  return log_add_exp(at.log_probs[token], at.log_probs[kUnk]);
}

Cursor StepScorer::prime(std::span<const TokenId> tokens, double* score) const {
  Cursor cursor = start();
  double total = 0.0;
  for (TokenId t : tokens) {
    total += forced_log_prob(cursor, t);
    cursor = advance(cursor, t);
  }
  if (score) *score = total;
  return cursor;
}

double StepScorer::sequence_score(std::span<const TokenId> tokens) const {
  double score = 0.0;
  const Cursor cursor = prime(tokens, &score);
  return score + forced_log_prob(cursor, end_token());
}

ModelScorer::ModelScorer(const Seq2Seq& model, const Annotations& annotations, Direction direction,
                         std::size_t extended_count, const RevisionMemory* memory)
    : model_(model),
      annotations_(annotations),
      direction_(direction),
      extended_count_(extended_count),
      memory_(memory && memory->active() ? memory : nullptr) {
  if (memory_ && direction_ != Direction::kForward) {
    throw std::invalid_argument("scorer: the revision memory is read by the forward decoder only");
  }
  if (memory_ && memory_->value_bound() > outcome_count()) {
    throw std::invalid_argument("scorer: memory value outside the outcome range");
  }
}

Cursor ModelScorer::finish(StepOutput step) const {
  Cursor cursor;
  cursor.state = std::move(step.state);
  const auto V = static_cast<Eigen::Index>(vocab_size());
  cursor.log_probs = Vec::Constant(static_cast<Eigen::Index>(outcome_count()), kNegInf);
  if (!memory_) {
    cursor.log_probs.head(V) = log_softmax(step.logits);
    return cursor;
  }
  const MemoryGateParams gate = model_.memory_gate();
  const Vec probs = softmax(step.logits);
  const Vec r = mem_read(*memory_, cursor.state.s, cursor.state.c, gate);
  const double theta = copy_gate(cursor.state.s, cursor.state.c, gate);
  const Vec mixed = mix_distributions(probs, r, theta, *memory_, outcome_count());
  for (Eigen::Index i = 0; i < mixed.size(); ++i) {
    cursor.log_probs[i] = mixed[i] > 0.0 ? std::log(mixed[i]) : kNegInf;
  }
  return cursor;
}

Cursor ModelScorer::start() const {
  const DecoderState s0 = model_.initial_state(direction_, annotations_);
  return finish(model_.decoder_step(direction_, start_token(), s0, annotations_));
}

Cursor ModelScorer::advance(const Cursor& from, TokenId token) const {
  if (token < 0 || static_cast<std::size_t>(token) >= outcome_count()) {
    throw std::out_of_range("scorer: token " + std::to_string(token) + " outside outcomes");
  }
  // Extended words reach the decoder as UNK.
  const TokenId input = static_cast<std::size_t>(token) < vocab_size() ? token : kUnk;
  return finish(model_.decoder_step(direction_, input, from.state, annotations_));
}

}  // namespace imt
