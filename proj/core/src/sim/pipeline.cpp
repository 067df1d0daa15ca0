#include "imt/sim/pipeline.hpp"

#include <map>

namespace imt {

std::vector<TrainingPair> encode_pairs(const ParallelCorpus& corpus, const Vocab& source, const Vocab& target) {
  std::vector<TrainingPair> out;
  out.reserve(corpus.pairs.size());
  for (const auto& p : corpus.pairs) out.push_back({source.encode(p.source), target.encode(p.target)});
  return out;
}

std::vector<Discourse> encode_discourses(const ParallelCorpus& corpus, const Vocab& source, const Vocab& target) {
  std::vector<Discourse> out;
  const auto base = static_cast<TokenId>(target.size());
  for (const auto& span : corpus.sessions) {
    Discourse d;
    std::map<std::string, TokenId> extended;
    for (std::size_t i = span.start; i < span.start + span.length; ++i) {
      const auto& pair = corpus.pairs[i];
      DiscourseSentence s{source.encode(pair.source), {}};
      for (const auto& w : pair.target) {
        if (target.contains(w)) {
          s.target.push_back(target.id(w));
        } else {
          s.target.push_back(extended.emplace(w, base + static_cast<TokenId>(extended.size())).first->second);
        }
      }
      d.push_back(std::move(s));
    }
    out.push_back(std::move(d));
  }
  return out;
}

TranslationModel train_translation_model(const ParallelCorpus& corpus, const PipelineOptions& options,
                                         PipelineReport* report) {
  const auto sources = sources_of(corpus);
  const auto targets = targets_of(corpus);
  Vocab src = build_vocab(sources, options.vocab_size, corpus.rare_words);
  Vocab tgt = build_vocab(targets, options.vocab_size, corpus.rare_words);
  ModelConfig config = options.model;
  config.src_vocab = src.size();
  config.tgt_vocab = tgt.size();
  TranslationModel tm{Seq2Seq(config), std::move(src), std::move(tgt)};

  PipelineReport local;
  local.training = train(tm.model, encode_pairs(corpus, tm.source_vocab, tm.target_vocab), options.training);
  if (options.train_memory) {
    local.memory = train_memory_params(tm.model, encode_discourses(corpus, tm.source_vocab, tm.target_vocab),
                                       options.memory);
  }
  if (report) *report = std::move(local);
  return tm;
}

}  // namespace imt
