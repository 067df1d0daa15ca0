#pragma once

#include "imt/corpus/corpus.hpp"
#include "imt/decoding/regenerate.hpp"
#include "imt/memory/revision_memory.hpp"
#include "imt/model/translation_model.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace imt {

inline constexpr double kDefaultOnlineLearningRate = 1e-5;

struct SessionOptions {
  std::size_t beam_size = kDefaultBeamSize;
  std::size_t memory_capacity = RevisionMemory::kDefaultCapacity;
  std::size_t memory_threshold = RevisionMemory::kDefaultThreshold;
  double online_lr = kDefaultOnlineLearningRate;
  bool memory = true;
  bool online_learning = true;
  Strategy strategy = Strategy::kBiDir;

  std::string to_json() const;
  static SessionOptions from_json(const std::string& text);
};

/// Where a hypothesis token came from, for display.
enum class TokenOrigin {
  kModel,      // decoded freely
  kConstraint, // pinned by a human revision
  kCopy,       // out-of-vocabulary word produced through the revision memory
  kAutoFixed,  // changed by regeneration relative to the previous snapshot
};

const char* origin_name(TokenOrigin o);

struct Snapshot {
  std::vector<TokenId> tokens;  // session-extended target ids
  ConstraintSet constraints;
  std::vector<TokenOrigin> origins;
  bool complete = true;
};

/// A replacement (or insertion/deletion) applied to a round.
struct Revision {
  std::size_t position = 0;
  bool insert = false;
  std::string old_surface;  // empty for insertions
  std::string new_surface;  // empty for deletions
  TokenId token = kUnk;
  DecoderState context;     // forward state at the revised slot
};

/// Request form of a revision.
struct RevisionRequest {
  std::size_t position = 0;
  std::string new_surface;  // empty = delete the word at `position`
  bool insert = false;      // pin `new_surface` in the gap before `position`
};

struct Round {
  std::size_t id = 0;
  Sentence source;
  std::vector<TokenId> source_ids;
  Snapshot initial;
  std::vector<Revision> revisions;
  std::vector<Snapshot> snapshots;  // one per revision
  bool accepted = false;

  const Snapshot& current() const { return snapshots.empty() ? initial : snapshots.back(); }
};

class SessionError : public std::runtime_error {
 public:
  enum class Code { kBadRequest, kOutOfRange, kRoundClosed, kNotFound };
  SessionError(Code code, const std::string& message) : std::runtime_error(message), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

/// One discourse-level interaction: a session-adapted copy of the base model,
/// a revision memory and the rounds translated so far. Not thread-safe; the
/// caller serializes access.
class Session {
 public:
  Session(std::shared_ptr<const TranslationModel> base, SessionOptions options, std::string id);

  const std::string& id() const { return id_; }
  const SessionOptions& options() const { return options_; }
  const TranslationModel& base() const { return *base_; }
  const Seq2Seq& adapted() const { return adapted_; }
  const RevisionMemory& memory() const { return memory_; }
  const ExtendedVocab& target_vocab() const { return target_vocab_; }
  const std::vector<Round>& rounds() const { return rounds_; }
  const Round& round(std::size_t id) const;
  std::size_t total_revisions() const { return total_revisions_; }

  /// Opens a round with the adapted model's beam-search translation.
  const Round& translate(const Sentence& source);
  const Round& translate(const std::string& source) { return translate(tokenize(source)); }

  /// Regenerates the round's hypothesis around the revision, keeping every
  /// earlier revision of the round pinned, and memorizes the revision.
  const Round& revise(std::size_t round_id, const RevisionRequest& request);

  /// What revise() would produce, without changing anything. `rendered`
  /// receives the surfaces, including a not yet memorized new word.
  Snapshot preview(std::size_t round_id, const RevisionRequest& request, Sentence* rendered = nullptr) const;

  /// Closes the round and, with online learning on, takes one optimizer step
  /// on the accepted pair.
  const Round& accept(std::size_t round_id);

  /// Surfaces of a hypothesis with deletions collapsed.
  Sentence render(std::span<const TokenId> tokens) const;
  Sentence render(const Snapshot& s) const { return render(s.tokens); }

 private:
  Round& open_round(std::size_t round_id);
  struct Planned {
    EditAction action;
    Regeneration regeneration;
    std::optional<std::string> new_extended;  // surface to intern when committing
  };
  Planned plan(const Round& round, const RevisionRequest& request) const;
  std::vector<TokenOrigin> origins_for(const std::vector<TokenId>& tokens, const ConstraintSet& pins,
                                       const std::vector<TokenId>* previous) const;
  std::vector<TokenId> training_target(const std::vector<TokenId>& tokens) const;
  SearchOptions search_options(std::size_t source_length) const;

  std::shared_ptr<const TranslationModel> base_;
  SessionOptions options_;
  std::string id_;
  Seq2Seq adapted_;
  RevisionMemory memory_;
  ExtendedVocab target_vocab_;
  std::vector<Round> rounds_;
  std::size_t total_revisions_ = 0;
};

/// Opens a session with a fresh unique id.
std::unique_ptr<Session> open_session(std::shared_ptr<const TranslationModel> base,
                                      const SessionOptions& options = {});

/// Replaces the base model's parameters with `model`'s; used to carry online
/// updates from one session into the next.
std::shared_ptr<const TranslationModel> with_parameters(const TranslationModel& base, const Seq2Seq& model);

}  // namespace imt
