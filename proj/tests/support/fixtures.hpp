#pragma once

#include "support/oracles.hpp"

#include "imt/math/ops.hpp"
#include "imt/memory/revision_memory.hpp"
#include "imt/model/seq2seq.hpp"

#include <random>
#include <vector>

namespace imt::testing {

/// Memory-mixed loss over one teacher-forced sentence of a random tiny model.
/// The memory holds items keyed by states of another sentence, with values
/// drawn from the gold target plus one out-of-vocabulary word that the gold
/// target also uses.
struct MixedLossFixture {
  struct Step {
    Vec s;
    Vec c;
    Vec probs;
    TokenId gold;
  };

  Seq2Seq model;
  std::vector<MemoryItem> items;
  std::vector<Step> steps;

  explicit MixedLossFixture(std::uint64_t seed) : model(tiny_model_config(seed)) {
    std::mt19937_64 rng(seed);
    const std::size_t V = model.config().tgt_vocab;
    const TokenId oov = static_cast<TokenId>(V);
    auto src = random_words(rng, V, 2 + rng() % 3);
    auto tgt = random_words(rng, V, 2 + rng() % 3);
    tgt[rng() % tgt.size()] = oov;
    const Annotations ann = model.encode(src);
    std::vector<TokenId> input = tgt;
    for (auto& t : input) {
      if (t >= static_cast<TokenId>(V)) t = kUnk;
    }
    const auto outs = model.teacher_force(Direction::kForward, ann, input);
    for (std::size_t j = 0; j < outs.size(); ++j) {
      steps.push_back({outs[j].state.s, outs[j].state.c, softmax(outs[j].logits), j < tgt.size() ? tgt[j] : kEos});
    }
    const auto other = random_words(rng, V, 3);
    const auto other_outs = model.teacher_force(Direction::kForward, model.encode(random_words(rng, V, 3)), other);
    for (std::size_t t = 0; t < other_outs.size(); ++t) {
      const TokenId value = t == 0 ? oov : tgt[rng() % tgt.size()] == oov ? static_cast<TokenId>(5) : tgt[rng() % tgt.size()];
      items.push_back({other_outs[t].state.s, other_outs[t].state.c, value, "w" + std::to_string(value), t});
    }
  }

  double loss() const {
    const MemoryGateParams gate = model.memory_gate();
    double total = 0.0;
    for (const auto& st : steps) total += mixed_step_nll(gate, items, st.s, st.c, st.probs, st.gold);
    return total;
  }

  double loss_and_grad() {
    const MemoryGateParams gate = model.memory_gate();
    MemoryGateGrad g;
    double total = 0.0;
    for (const auto& st : steps) total += mixed_step_nll(gate, items, st.s, st.c, st.probs, st.gold, &g);
    auto& p = model.params();
    p.get("mem.w1").grad[0] += g.w1;
    p.get("mem.w2").grad[0] += g.w2;
    p.get("mem.ws").grad.vec() += g.ws;
    p.get("mem.wc").grad.vec() += g.wc;
    return total;
  }
};

}  // namespace imt::testing
