#include "imt/corpus/corpus.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace imt {

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("synthetic spec: " + what); };
  if (source_words < 4) fail("source_words must be at least 4");
  if (min_length == 0 || min_length > max_length) fail("need 1 <= min_length <= max_length");
  if (sessions == 0 || sentences_per_session == 0) fail("sessions and sentences_per_session must be positive");
  if (rare_words > 0 && repetition < 2) fail("repetition must be at least 2 so rare words recur");
  if (rare_words > 0 && repetition > sentences_per_session) fail("repetition exceeds sentences_per_session");
  if (rule != "dict_reorder" && rule != "reverse_dict" && rule != "copy") fail("unknown rule '" + rule + "'");
  for (double p : {modifier_rate, noise_rate, register_consistency}) {
    if (!(p >= 0.0 && p <= 1.0)) fail("rates must lie in [0, 1]");
  }
  const auto modifiers = source_words * 3 / 10;
  if (ambiguous_words > source_words - modifiers) fail("more ambiguous words than head words");
}

std::string SyntheticSpec::to_json() const {
  nlohmann::json j = {{"seed", seed},
                      {"language_seed", language_seed},
                      {"source_words", source_words},
                      {"min_length", min_length},
                      {"max_length", max_length},
                      {"sessions", sessions},
                      {"sentences_per_session", sentences_per_session},
                      {"rare_words", rare_words},
                      {"repetition", repetition},
                      {"rule", rule},
                      {"modifier_rate", modifier_rate},
                      {"noise_rate", noise_rate},
                      {"ambiguous_words", ambiguous_words},
                      {"register_consistency", register_consistency}};
  return j.dump(2);
}

SyntheticSpec SyntheticSpec::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("synthetic spec: expected a JSON object");
  SyntheticSpec s;
  s.seed = j.value("seed", s.seed);
  s.language_seed = j.value("language_seed", s.language_seed);
  s.source_words = j.value("source_words", s.source_words);
  s.min_length = j.value("min_length", s.min_length);
  s.max_length = j.value("max_length", s.max_length);
  s.sessions = j.value("sessions", s.sessions);
  s.sentences_per_session = j.value("sentences_per_session", s.sentences_per_session);
  s.rare_words = j.value("rare_words", s.rare_words);
  s.repetition = j.value("repetition", s.repetition);
  s.rule = j.value("rule", s.rule);
  s.modifier_rate = j.value("modifier_rate", s.modifier_rate);
  s.noise_rate = j.value("noise_rate", s.noise_rate);
  s.ambiguous_words = j.value("ambiguous_words", s.ambiguous_words);
  s.register_consistency = j.value("register_consistency", s.register_consistency);
  s.validate();
  return s;
}

SyntheticSpec SyntheticSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read spec: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";

// Word of `syllables` consonant-vowel pairs, plus a final consonant if `closed`.
std::string make_word(std::mt19937_64& rng, std::size_t syllables, bool closed) {
  std::string w;
  for (std::size_t i = 0; i < syllables; ++i) {
    w += kConsonants[rng() % kConsonants.size()];
    w += kVowels[rng() % kVowels.size()];
  }
  if (closed) w += kConsonants[rng() % kConsonants.size()];
  return w;
}

std::vector<std::string> make_words(std::mt19937_64& rng, std::size_t count, std::size_t syllables,
                                    bool closed, std::set<std::string>& used) {
  std::vector<std::string> out;
  while (out.size() < count) {
    std::string w = make_word(rng, syllables, closed);
    if (used.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

}  // namespace

SyntheticLanguage::SyntheticLanguage(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.language_seed);
  std::set<std::string> used;
  // Source words have two open syllables, target words two syllables and a
  // closing consonant, particles one syllable; the sets never collide.
  auto source = make_words(rng, spec.source_words, 2, false, used);
  const std::size_t n_mod = spec.source_words * 3 / 10;
  modifiers_.assign(source.begin(), source.begin() + static_cast<std::ptrdiff_t>(n_mod));
  heads_.assign(source.begin() + static_cast<std::ptrdiff_t>(n_mod), source.end());
  modifier_set_.insert(modifiers_.begin(), modifiers_.end());

  const auto target = make_words(rng, spec.source_words + spec.ambiguous_words, 2, true, used);
  particles_ = make_words(rng, 3, 1, false, used);
  for (std::size_t i = 0; i < source.size(); ++i) dictionary_[source[i]] = {target[i], ""};
  for (std::size_t k = 0; k < spec.ambiguous_words; ++k) {
    dictionary_[heads_[k]].second = target[spec.source_words + k];
  }
}

bool SyntheticLanguage::is_modifier(const std::string& word) const { return modifier_set_.contains(word); }

bool SyntheticLanguage::is_ambiguous(const std::string& word) const {
  const auto it = dictionary_.find(word);
  return it != dictionary_.end() && !it->second.second.empty();
}

const std::string& SyntheticLanguage::translate_word(const std::string& word, bool alternate) const {
  const auto it = dictionary_.find(word);
  if (it == dictionary_.end()) throw std::out_of_range("synthetic language: unknown word '" + word + "'");
  return alternate && !it->second.second.empty() ? it->second.second : it->second.first;
}

namespace {

struct SessionContext {
  bool register_b = false;
  std::map<std::string, std::string> rare;  // source rare word -> target rare word
};

Sentence translate(const SyntheticSpec& spec, const SyntheticLanguage& lang, const SessionContext& ctx,
                   const Sentence& source, std::mt19937_64& rng) {
  std::bernoulli_distribution follow(spec.register_consistency);
  std::bernoulli_distribution noise(spec.noise_rate);
  auto word = [&](const std::string& w) -> std::string {
    if (const auto it = ctx.rare.find(w); it != ctx.rare.end()) return it->second;
    if (spec.rule == "copy") return w;
    if (lang.is_ambiguous(w)) return lang.translate_word(w, follow(rng) ? ctx.register_b : !ctx.register_b);
    return lang.translate_word(w);
  };
  Sentence out;
  auto emit = [&](const std::string& w) {
    out.push_back(word(w));
    if (noise(rng)) out.push_back(lang.particles()[rng() % lang.particles().size()]);
  };
  if (spec.rule == "reverse_dict") {
    for (auto it = source.rbegin(); it != source.rend(); ++it) emit(*it);
    return out;
  }
  for (std::size_t i = 0; i < source.size(); ++i) {
    const bool swap = spec.rule == "dict_reorder" && i + 1 < source.size() && lang.is_modifier(source[i]) &&
                      !lang.is_modifier(source[i + 1]);
    if (swap) {
      emit(source[i + 1]);
      emit(source[i]);
      ++i;
    } else {
      emit(source[i]);
    }
  }
  return out;
}

}  // namespace

ParallelCorpus generate(const SyntheticSpec& spec) {
  spec.validate();
  const SyntheticLanguage lang(spec);
  std::mt19937_64 rng(spec.seed * 0x9E3779B97F4A7C15ULL + spec.language_seed);
  std::uniform_int_distribution<std::size_t> length(spec.min_length, spec.max_length);
  std::bernoulli_distribution modifier(spec.modifier_rate);
  // Mildly skewed head frequencies.
  std::vector<double> weights;
  for (std::size_t i = 0; i < lang.heads().size(); ++i) weights.push_back(1.0 / std::sqrt(1.0 + static_cast<double>(i)));
  std::discrete_distribution<std::size_t> head(weights.begin(), weights.end());

  std::set<std::string> used;
  for (const auto& w : lang.heads()) used.insert(w);
  for (const auto& w : lang.modifiers()) used.insert(w);

  ParallelCorpus corpus;
  for (std::size_t s = 0; s < spec.sessions; ++s) {
    SessionContext ctx;
    ctx.register_b = rng() % 2 == 1;
    std::vector<Sentence> sources;
    for (std::size_t k = 0; k < spec.sentences_per_session; ++k) {
      const std::size_t len = length(rng);
      Sentence src;
      while (src.size() < len) {
        if (len - src.size() >= 2 && modifier(rng)) src.push_back(lang.modifiers()[rng() % lang.modifiers().size()]);
        src.push_back(lang.heads()[head(rng)]);
      }
      sources.push_back(std::move(src));
    }
    for (std::size_t r = 0; r < spec.rare_words; ++r) {
      std::string src_word, tgt_word;
      do src_word = make_word(rng, 3, false); while (!used.insert(src_word).second);
      do tgt_word = make_word(rng, 3, true); while (!used.insert(tgt_word).second);
      ctx.rare[src_word] = tgt_word;
      corpus.rare_words.insert(src_word);
      corpus.rare_words.insert(tgt_word);
      std::vector<std::size_t> order(sources.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t k = 0; k < spec.repetition; ++k) {
        Sentence& sent = sources[order[k]];
        // Rare words take the place of a regular head word when one is left.
        std::vector<std::size_t> slots;
        for (std::size_t i = 0; i < sent.size(); ++i) {
          if (!lang.is_modifier(sent[i]) && !ctx.rare.contains(sent[i])) slots.push_back(i);
        }
        if (slots.empty()) {
          sent.push_back(src_word);
        } else {
          sent[slots[rng() % slots.size()]] = src_word;
        }
      }
    }
    corpus.sessions.push_back({corpus.pairs.size(), sources.size()});
    for (auto& src : sources) {
      Sentence tgt = translate(spec, lang, ctx, src, rng);
      corpus.pairs.push_back({std::move(src), std::move(tgt)});
    }
  }
  return corpus;
}

Vocab build_vocab(std::span<const Sentence> sentences, std::size_t max_size,
                  const std::set<std::string>& exclude) {
  if (max_size <= static_cast<std::size_t>(kReservedCount)) {
    throw std::invalid_argument("build_vocab: max_size must exceed the reserved token count");
  }
  const auto& reserved = Vocab::reserved_surfaces();
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : sentences) {
    for (const auto& w : sentence) {
      if (exclude.contains(w) || std::find(reserved.begin(), reserved.end(), w) != reserved.end()) continue;
      ++counts[w];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep = std::min(ranked.size(), max_size - static_cast<std::size_t>(kReservedCount));
  std::vector<std::string> words;
  for (std::size_t i = 0; i < keep; ++i) words.push_back(ranked[i].first);
  return Vocab(words);
}

Sentence tokenize(std::string_view text) {
  Sentence out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_corpus(const std::filesystem::path& dir, const std::string& prefix, const ParallelCorpus& corpus) {
  std::filesystem::create_directories(dir);
  auto src = open_out(dir / (prefix + ".src"));
  auto tgt = open_out(dir / (prefix + ".tgt"));
  for (const auto& p : corpus.pairs) {
    src << detokenize(p.source) << '\n';
    tgt << detokenize(p.target) << '\n';
  }
  auto sessions = open_out(dir / (prefix + ".sessions"));
  for (const auto& s : corpus.sessions) sessions << s.start << ' ' << s.length << '\n';
  auto rare = open_out(dir / (prefix + ".rare"));
  for (const auto& w : corpus.rare_words) rare << w << '\n';
}

ParallelCorpus read_corpus(const std::filesystem::path& dir, const std::string& prefix) {
  const auto src = read_lines(dir / (prefix + ".src"));
  const auto tgt = read_lines(dir / (prefix + ".tgt"));
  if (src.size() != tgt.size()) {
    throw std::runtime_error("corpus " + prefix + ": .src has " + std::to_string(src.size()) +
                             " lines but .tgt has " + std::to_string(tgt.size()));
  }
  ParallelCorpus corpus;
  for (std::size_t i = 0; i < src.size(); ++i) corpus.pairs.push_back({tokenize(src[i]), tokenize(tgt[i])});

  const auto sessions_path = dir / (prefix + ".sessions");
  if (std::filesystem::exists(sessions_path)) {
    std::size_t next = 0;
    for (const auto& line : read_lines(sessions_path)) {
      if (line.empty()) continue;
      std::istringstream in(line);
      SessionSpan s;
      if (!(in >> s.start >> s.length) || s.start != next || s.length == 0) {
        throw std::runtime_error("corpus " + prefix + ": bad session line '" + line + "'");
      }
      next = s.start + s.length;
      corpus.sessions.push_back(s);
    }
    if (next != corpus.pairs.size()) throw std::runtime_error("corpus " + prefix + ": sessions do not cover all pairs");
  } else {
    for (std::size_t i = 0; i < corpus.pairs.size(); ++i) corpus.sessions.push_back({i, 1});
  }
  const auto rare_path = dir / (prefix + ".rare");
  if (std::filesystem::exists(rare_path)) {
    for (const auto& line : read_lines(rare_path)) {
      if (!line.empty()) corpus.rare_words.insert(line);
    }
  }
  return corpus;
}

std::vector<Sentence> sources_of(const ParallelCorpus& corpus) {
  std::vector<Sentence> out;
  for (const auto& p : corpus.pairs) out.push_back(p.source);
  return out;
}

std::vector<Sentence> targets_of(const ParallelCorpus& corpus) {
  std::vector<Sentence> out;
  for (const auto& p : corpus.pairs) out.push_back(p.target);
  return out;
}

}  // namespace imt
