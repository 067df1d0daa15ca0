#pragma once

#include "imt/model/seq2seq.hpp"
#include "imt/model/vocab.hpp"

#include <filesystem>

namespace imt {

/// A trained model together with the vocabularies it was trained on.
struct TranslationModel {
  Seq2Seq model;
  Vocab source_vocab;
  Vocab target_vocab;
};

/// Single-file checkpoint: parameters and optimizer state, with the model
/// config and both vocabularies in the metadata blob.
void save_translation_model(const std::filesystem::path& path, const TranslationModel& tm);
TranslationModel load_translation_model(const std::filesystem::path& path);

}  // namespace imt
