#pragma once

#include "imt/decoding/scorer.hpp"

#include <span>
#include <vector>

namespace imt {

inline constexpr std::size_t kDefaultBeamSize = 4;

/// Default length bound for a source of `source_length` tokens.
constexpr std::size_t default_max_len(std::size_t source_length) { return 2 * source_length + 5; }

struct SearchOptions {
  std::size_t beam_size = kDefaultBeamSize;
  /// Upper bound on emitted tokens, counting the terminal symbol.
  std::size_t max_len = 20;
};

/// A decoded sequence in the scorer's own order, without start/end symbols.
struct Hypothesis {
  std::vector<TokenId> tokens;
  /// Sum of per-step log-probabilities, including the terminal when complete.
  double score = 0.0;
  std::size_t constraints_met = 0;
  /// False when no hypothesis reached the terminal within max_len.
  bool complete = false;

  /// Score per emitted step (tokens plus the terminal when complete).
  double normalized_score() const;
};

/// Whether `needles` occurs in `haystack` as an ordered subsequence.
bool contains_subsequence(std::span<const TokenId> haystack, std::span<const TokenId> needles);

/// Grid beam search continuing from `root`. Cell (t, c) holds hypotheses of
/// t tokens covering the first c constraints; a hypothesis either generates a
/// free token (stays in row c) or places constraint c (moves to row c + 1).
/// Only the top row may emit the terminal. Final selection is by normalized
/// score; ties go to the lexicographically smaller token sequence.
Hypothesis grid_beam_search(const StepScorer& scorer, const Cursor& root,
                            std::span<const TokenId> constraints, const SearchOptions& options);
Hypothesis grid_beam_search(const StepScorer& scorer, std::span<const TokenId> constraints,
                            const SearchOptions& options);

/// Unconstrained beam search; beam_size 1 is greedy decoding.
Hypothesis beam_search(const StepScorer& scorer, const SearchOptions& options);
Hypothesis beam_search(const StepScorer& scorer, const Cursor& root, const SearchOptions& options);

}  // namespace imt
