#pragma once

// Independent reference implementations used by unit and acceptance tests.

#include "imt/decoding/regenerate.hpp"
#include "imt/decoding/search.hpp"
#include "imt/math/ops.hpp"
#include "imt/model/seq2seq.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace imt::testing {

/// Scorer whose next-token logits are an arbitrary function of the history.
class HistoryScorer final : public StepScorer {
 public:
  using Logits = std::function<Vec(std::span<const TokenId> history)>;

  HistoryScorer(Direction d, std::size_t vocab, Logits logits)
      : direction_(d), vocab_(vocab), logits_(std::move(logits)) {}

  Direction direction() const override { return direction_; }
  std::size_t vocab_size() const override { return vocab_; }
  std::size_t outcome_count() const override { return vocab_; }

  Cursor start() const override { return make({}); }
  Cursor advance(const Cursor& from, TokenId token) const override {
    std::vector<TokenId> h = history(from);
    h.push_back(token);
    return make(h);
  }

 private:
  static std::vector<TokenId> history(const Cursor& c) {
    std::vector<TokenId> h;
    for (Eigen::Index i = 0; i < c.state.s.size(); ++i) h.push_back(static_cast<TokenId>(c.state.s[i]));
    return h;
  }
  Cursor make(const std::vector<TokenId>& h) const {
    Cursor c;
    c.state.s = Vec(static_cast<Eigen::Index>(h.size()));
    for (std::size_t i = 0; i < h.size(); ++i) c.state.s[static_cast<Eigen::Index>(i)] = h[i];
    c.state.c = Vec();
    c.log_probs = log_softmax(logits_(h));
    return c;
  }

  Direction direction_;
  std::size_t vocab_;
  Logits logits_;
};

/// Logits of -8 everywhere except the listed entries.
inline Vec logits_with(std::size_t vocab, std::initializer_list<std::pair<TokenId, double>> entries) {
  Vec v = Vec::Constant(static_cast<Eigen::Index>(vocab), -8.0);
  for (const auto& [t, x] : entries) v[t] = x;
  return v;
}

/// Every emittable token sequence of length < max_len (room for the terminal).
inline std::vector<std::vector<TokenId>> enumerate_sequences(const StepScorer& scorer, std::size_t max_len) {
  std::vector<TokenId> alphabet;
  for (std::size_t t = 0; t < scorer.outcome_count(); ++t) {
    const auto id = static_cast<TokenId>(t);
    if (scorer.emittable(id) && id != scorer.end_token()) alphabet.push_back(id);
  }
  std::vector<std::vector<TokenId>> all = {{}};
  std::vector<std::vector<TokenId>> frontier = {{}};
  for (std::size_t len = 1; len < max_len; ++len) {
    std::vector<std::vector<TokenId>> next;
    for (const auto& seq : frontier) {
      for (TokenId t : alphabet) {
        auto s = seq;
        s.push_back(t);
        next.push_back(std::move(s));
      }
    }
    all.insert(all.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return all;
}

/// Summed log-probability of `seq` plus the terminal, starting from `root`;
/// accumulated in the same order as the search does.
inline double score_from(const StepScorer& scorer, const Cursor& root, std::span<const TokenId> seq) {
  double score = 0.0;
  Cursor c = root;
  for (TokenId t : seq) {
    score += scorer.forced_log_prob(c, t);
    c = scorer.advance(c, t);
  }
  return score + scorer.forced_log_prob(c, scorer.end_token());
}

/// Brute-force argmax of the length-normalized complete-sequence score among
/// sequences that contain `constraints` in order, continuing from `root`.
inline std::optional<std::vector<TokenId>> brute_force_argmax(const StepScorer& scorer, const Cursor& root,
                                                              std::size_t max_len,
                                                              std::span<const TokenId> constraints = {}) {
  std::optional<std::vector<TokenId>> best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& seq : enumerate_sequences(scorer, max_len)) {
    if (!contains_subsequence(seq, constraints)) continue;
    const double score = score_from(scorer, root, seq) / static_cast<double>(seq.size() + 1);
    if (score > best_score || (score == best_score && best && seq < *best)) {
      best_score = score;
      best = seq;
    }
  }
  return best;
}

inline std::optional<std::vector<TokenId>> brute_force_argmax(const StepScorer& scorer, std::size_t max_len,
                                                              std::span<const TokenId> constraints = {}) {
  return brute_force_argmax(scorer, scorer.start(), max_len, constraints);
}

/// Step-by-step argmax with lower-id tie-break.
inline std::vector<TokenId> greedy_decode(const StepScorer& scorer, std::size_t max_len) {
  std::vector<TokenId> out;
  Cursor c = scorer.start();
  for (std::size_t t = 0; t < max_len; ++t) {
    TokenId best = -1;
    double best_lp = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < scorer.outcome_count(); ++k) {
      const double lp = scorer.free_log_prob(c, static_cast<TokenId>(k));
      if (lp > best_lp) {
        best_lp = lp;
        best = static_cast<TokenId>(k);
      }
    }
    if (best == scorer.end_token()) break;
    out.push_back(best);
    c = scorer.advance(c, best);
  }
  return out;
}

inline ModelConfig tiny_model_config(std::uint64_t seed, std::size_t vocab = 9) {
  ModelConfig c;
  c.src_vocab = vocab;
  c.tgt_vocab = vocab;
  c.embed = 4;
  c.enc_hidden = 3;
  c.dec_hidden = 5;
  c.readout = 4;
  c.init_range = 1.0;  // sharp distributions make search differences visible
  c.seed = seed;
  return c;
}

inline std::vector<TokenId> random_words(std::mt19937_64& rng, std::size_t vocab, std::size_t len) {
  std::vector<TokenId> s(len);
  for (auto& t : s) t = kReservedCount + static_cast<TokenId>(rng() % (vocab - kReservedCount));
  return s;
}

}  // namespace imt::testing
