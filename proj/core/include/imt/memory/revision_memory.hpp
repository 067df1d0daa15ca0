#pragma once

#include "imt/model/seq2seq.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace imt {

/// One memorized revision: the forward decoder's (s', c') at the revised slot
/// and the word the human put there.
struct MemoryItem {
  Vec key_state;
  Vec key_context;
  TokenId value = kUnk;  // vocabulary or extended id
  std::string surface;
  std::uint64_t index = 0;  // insertion order over the memory's lifetime
};

class RevisionMemory {
 public:
  static constexpr std::size_t kDefaultCapacity = 100;
  static constexpr std::size_t kDefaultThreshold = 20;

  explicit RevisionMemory(std::size_t capacity = kDefaultCapacity,
                          std::size_t threshold = kDefaultThreshold);

  /// Appends an item, evicting the oldest ones beyond capacity.
  void write(Vec key_state, Vec key_context, TokenId value, std::string surface);
  /// Counts a revision toward the activation threshold.
  void record_revision() { ++revisions_; }

  /// Reads are live once more than `threshold` revisions were seen and at
  /// least one item is stored.
  bool active() const { return revisions_ > threshold_ && !items_.empty(); }

  const std::vector<MemoryItem>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t threshold() const { return threshold_; }
  std::size_t revisions() const { return revisions_; }
  /// Largest value id stored plus one (0 when empty).
  std::size_t value_bound() const;

  /// Diagnostics: JSON array of {index, surface, value, state_norm, context_norm}.
  std::string dump() const;

 private:
  std::size_t capacity_;
  std::size_t threshold_;
  std::size_t revisions_ = 0;
  std::uint64_t next_index_ = 0;
  std::vector<MemoryItem> items_;
};

/// Copy distribution over items: softmax_t(w1 |s . s'_t| + w2 |c . c'_t|).
Vec mem_read(std::span<const MemoryItem> items, const Vec& s, const Vec& c,
             const MemoryGateParams& gate);
Vec mem_read(const RevisionMemory& memory, const Vec& s, const Vec& c, const MemoryGateParams& gate);

/// theta = sigmoid(ws . s + wc . c).
double copy_gate(const Vec& s, const Vec& c, const MemoryGateParams& gate);

/// (1 - theta) * model_probs + theta * r, where r's mass on item t goes to the
/// outcome id of its value. The result has `outcome_count` entries.
Vec mix_distributions(const Vec& model_probs, const Vec& r, double theta,
                      std::span<const MemoryItem> items, std::size_t outcome_count);
Vec mix_distributions(const Vec& model_probs, const Vec& r, double theta,
                      const RevisionMemory& memory, std::size_t outcome_count);

/// Gradient of a mixed-distribution loss with respect to the gate weights.
struct MemoryGateGrad {
  double w1 = 0.0;
  double w2 = 0.0;
  Vec ws;
  Vec wc;
};

/// -log P_mix(gold) for one decoder step. `model_probs` is the decoder's
/// softmax over the vocabulary. Accumulates into `grad` when non-null.
/// An empty `items` reduces to the plain model cross-entropy.
double mixed_step_nll(const MemoryGateParams& gate, std::span<const MemoryItem> items,
                      const Vec& s, const Vec& c, const Vec& model_probs, TokenId gold,
                      MemoryGateGrad* grad = nullptr);

/// One discourse-ordered training sentence. Target ids at or beyond the model
/// vocabulary denote out-of-vocabulary words, unique per discourse.
struct DiscourseSentence {
  std::vector<TokenId> source;
  std::vector<TokenId> target;
};
using Discourse = std::vector<DiscourseSentence>;

struct MemoryTrainingOptions {
  std::size_t epochs = 30;
  double learning_rate = 0.05;
  /// Probability that an in-vocabulary target word of an earlier sentence is
  /// written to the scratch memory. Out-of-vocabulary words are always written.
  double sample_rate = 0.2;
  std::size_t capacity = RevisionMemory::kDefaultCapacity;
  std::uint64_t seed = 1;
};

struct MemoryTrainingReport {
  std::vector<double> epoch_loss;  // mean mixed NLL per step
  double mean_gate_gold_in_memory = 0.0;
  double mean_gate_gold_absent = 0.0;
  std::size_t steps = 0;
};

/// Fits mem.w1, mem.w2, mem.ws, mem.wc on scratch memories built from earlier
/// sentences of each discourse. All other model parameters are left untouched.
MemoryTrainingReport train_memory_params(Seq2Seq& model, std::span<const Discourse> discourses,
                                         const MemoryTrainingOptions& options = {});

}  // namespace imt
