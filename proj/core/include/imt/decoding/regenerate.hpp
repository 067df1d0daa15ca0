#pragma once

#include "imt/decoding/search.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace imt {

/// A human edit at `position` of the current hypothesis. A replacement pins
/// `token` in place of the word at `position`; an insertion pins it in the
/// gap before `position` (position == length appends). Deletions replace the
/// word with kBlank.
struct EditAction {
  std::size_t position = 0;
  TokenId token = kUnk;
  bool insert = false;
};

/// A word pinned by an earlier revision, located in the current hypothesis.
struct PinnedToken {
  TokenId token = kUnk;
  std::size_t position = 0;
};

/// Pinned words ordered left to right (strictly increasing positions).
struct ConstraintSet {
  std::vector<PinnedToken> pins;
  /// Index into `pins` of the most recent revision, if any.
  std::size_t anchor = 0;

  std::vector<TokenId> tokens() const;
  bool empty() const { return pins.empty(); }
};

enum class Strategy { kUniDir, kUniDirGrid, kBiDir };

const char* strategy_name(Strategy s);
Strategy parse_strategy(const std::string& name);

struct Regeneration {
  /// Full sentence, left to right.
  Hypothesis hypothesis;
  /// Accumulated constraints plus the new revision, remapped onto the output.
  ConstraintSet constraints;
  /// Position of the revised token in the output.
  std::size_t revised_position = 0;
  /// Forward decoder state at the revised slot (before emitting the revised word).
  DecoderState revision_context;
  /// Constraints dropped because the new revision pinned the same slot.
  std::size_t dropped = 0;
};

/// Sequential bi-directional regeneration. The forward scorer keeps the prefix,
/// places the revised word and regenerates the right part through the
/// right-side constraints; the backward scorer then reads the new right part
/// and the revised word in reverse and regenerates the left part through the
/// left-side constraints. `options.max_len` bounds the whole sentence.
Regeneration bidir_regenerate(const StepScorer& forward, const StepScorer& backward,
                              std::span<const TokenId> current, const EditAction& revision,
                              const ConstraintSet& accumulated, const SearchOptions& options);

/// Left-to-right regeneration: the prefix before the revision is kept verbatim
/// and only the suffix is decoded (constrained by right-side pins when
/// `use_grid`). Left-side pins are kept because the prefix is untouched.
Regeneration unidir_regenerate(const StepScorer& forward, std::span<const TokenId> current,
                               const EditAction& revision, const ConstraintSet& accumulated,
                               const SearchOptions& options, bool use_grid);

Regeneration regenerate(Strategy strategy, const StepScorer& forward, const StepScorer& backward,
                        std::span<const TokenId> current, const EditAction& revision,
                        const ConstraintSet& accumulated, const SearchOptions& options);

/// CLI constraint file: one `order_index<TAB>surface` per line. Entries are
/// returned sorted by order index; duplicate indices are rejected.
struct ConstraintEntry {
  std::size_t order = 0;
  std::string surface;
};
std::vector<ConstraintEntry> read_constraint_file(const std::filesystem::path& path);
std::vector<ConstraintEntry> parse_constraints(const std::string& text);

}  // namespace imt
