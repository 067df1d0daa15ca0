#pragma once

#include "imt/corpus/corpus.hpp"

#include <array>
#include <span>
#include <vector>

namespace imt {

inline constexpr std::size_t kBleuOrder = 4;

/// Sufficient statistics of BLEU for one or more sentences.
struct BleuStats {
  std::array<std::size_t, kBleuOrder> matches{};  // clipped n-gram matches, n = 1..4
  std::array<std::size_t, kBleuOrder> totals{};   // hypothesis n-grams
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;  // closest reference length (shorter on ties)

  BleuStats& operator+=(const BleuStats& other);
  bool operator==(const BleuStats&) const = default;
};

BleuStats bleu_stats(std::span<const std::string> hyp, std::span<const Sentence> refs);

/// Geometric mean of clipped precisions times exp(min(0, 1 - r/c)).
double bleu_from_stats(const BleuStats& stats);

/// `refs[i]` holds every reference of sentence i. Throws on an empty or
/// mismatched set.
double corpus_bleu(std::span<const Sentence> hyps, std::span<const std::vector<Sentence>> refs);
/// Single-reference convenience overload.
double corpus_bleu(std::span<const Sentence> hyps, std::span<const Sentence> refs);

/// Sentence BLEU with add-one smoothing on the n >= 2 precisions.
double sentence_bleu_smoothed(std::span<const std::string> hyp, std::span<const Sentence> refs);
double sentence_bleu_smoothed(std::span<const std::string> hyp, const Sentence& ref);

}  // namespace imt
