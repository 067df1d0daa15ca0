#pragma once

#include "imt/corpus/corpus.hpp"
#include "imt/memory/revision_memory.hpp"
#include "imt/model/trainer.hpp"
#include "imt/model/translation_model.hpp"

#include <vector>

namespace imt {

struct PipelineOptions {
  std::size_t vocab_size = 200;  // per side, reserved tokens included
  ModelConfig model;             // vocabulary sizes are filled in from the corpus
  TrainingConfig training;
  bool train_memory = true;
  MemoryTrainingOptions memory;
};

struct PipelineReport {
  TrainingReport training;
  MemoryTrainingReport memory;
};

/// Id-encoded pairs; words outside the vocabularies become UNK.
std::vector<TrainingPair> encode_pairs(const ParallelCorpus& corpus, const Vocab& source, const Vocab& target);

/// One discourse per corpus session. Out-of-vocabulary target words get
/// extended ids (vocabulary size + k), numbered per session in order of first use.
std::vector<Discourse> encode_discourses(const ParallelCorpus& corpus, const Vocab& source, const Vocab& target);

/// Builds vocabularies (rare words excluded), trains the joint model and then,
/// optionally, the memory gate.
TranslationModel train_translation_model(const ParallelCorpus& corpus, const PipelineOptions& options,
                                         PipelineReport* report = nullptr);

}  // namespace imt
