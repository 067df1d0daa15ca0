#pragma once

#include "imt/model/vocab.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace imt {

using Sentence = std::vector<std::string>;

/// Parameters of a synthetic language pair and of one sample drawn from it.
///
/// `language_seed` fixes the lexicon and grammar; `seed` fixes which
/// sentences are drawn. Two corpora with the same language seed and different
/// seeds are train/test splits of the same language.
struct SyntheticSpec {
  std::uint64_t seed = 1;
  std::uint64_t language_seed = 7;
  std::size_t source_words = 60;     // regular source lexicon size
  std::size_t min_length = 4;
  std::size_t max_length = 9;
  std::size_t sessions = 40;
  std::size_t sentences_per_session = 10;
  std::size_t rare_words = 2;        // out-of-vocabulary words per session
  std::size_t repetition = 3;        // sentences per session using each rare word
  /// "dict_reorder" (dictionary + modifier/head swap), "reverse_dict" or "copy".
  std::string rule = "dict_reorder";
  double modifier_rate = 0.4;        // chance a head word is preceded by a modifier
  double noise_rate = 0.05;          // chance a particle follows a target word
  std::size_t ambiguous_words = 8;   // heads with two register-dependent translations
  double register_consistency = 0.9; // chance an ambiguous word follows the session register

  void validate() const;
  std::string to_json() const;
  static SyntheticSpec from_json(const std::string& text);
  static SyntheticSpec load(const std::filesystem::path& path);
};

/// Lexicon and grammar determined by a spec's language seed.
class SyntheticLanguage {
 public:
  explicit SyntheticLanguage(const SyntheticSpec& spec);

  const std::vector<std::string>& heads() const { return heads_; }
  const std::vector<std::string>& modifiers() const { return modifiers_; }
  const std::vector<std::string>& particles() const { return particles_; }
  bool is_modifier(const std::string& word) const;
  bool is_ambiguous(const std::string& word) const;
  /// Dictionary translation; `alternate` selects the second register of an
  /// ambiguous word. Unknown words throw.
  const std::string& translate_word(const std::string& word, bool alternate = false) const;

 private:
  std::vector<std::string> heads_;
  std::vector<std::string> modifiers_;
  std::vector<std::string> particles_;
  std::set<std::string> modifier_set_;
  // word -> (translation, alternate translation or empty)
  std::map<std::string, std::pair<std::string, std::string>> dictionary_;
};

struct SentencePair {
  Sentence source;
  Sentence target;

  bool operator==(const SentencePair&) const = default;
};

/// Consecutive run of pairs forming one discourse.
struct SessionSpan {
  std::size_t start = 0;
  std::size_t length = 0;

  bool operator==(const SessionSpan&) const = default;
};

struct ParallelCorpus {
  std::vector<SentencePair> pairs;
  std::vector<SessionSpan> sessions;
  /// Words that must stay out of the vocabulary (both sides).
  std::set<std::string> rare_words;

  bool operator==(const ParallelCorpus&) const = default;
};

/// Deterministic in `spec`. Throws std::invalid_argument for inconsistent specs.
ParallelCorpus generate(const SyntheticSpec& spec);

/// Reserved tokens, then the `max_size - reserved` most frequent words of
/// `sentences` (ties broken lexicographically) excluding `exclude`.
Vocab build_vocab(std::span<const Sentence> sentences, std::size_t max_size,
                  const std::set<std::string>& exclude = {});

/// Whitespace tokenization; runs of whitespace act as one separator.
Sentence tokenize(std::string_view text);
std::string detokenize(std::span<const std::string> tokens);

/// Writes <prefix>.src, <prefix>.tgt, <prefix>.sessions ("start length" per
/// line) and <prefix>.rare (one word per line) into `dir`.
void write_corpus(const std::filesystem::path& dir, const std::string& prefix, const ParallelCorpus& corpus);
/// Reads the files written by write_corpus. A missing .sessions file means
/// one session per sentence; a missing .rare file means no rare words.
ParallelCorpus read_corpus(const std::filesystem::path& dir, const std::string& prefix);

/// Source and target sides as separate lists.
std::vector<Sentence> sources_of(const ParallelCorpus& corpus);
std::vector<Sentence> targets_of(const ParallelCorpus& corpus);

}  // namespace imt
