#include "imt/model/translation_model.hpp"

#include "json.hpp"

#include <stdexcept>

namespace imt {

namespace {

constexpr const char* kFormat = "imt-translation-model";

std::vector<std::string> user_words(const Vocab& v) {
  return {v.tokens().begin() + kReservedCount, v.tokens().end()};
}

}  // namespace

void save_translation_model(const std::filesystem::path& path, const TranslationModel& tm) {
  nlohmann::json meta;
  meta["format"] = kFormat;
  meta["config"] = nlohmann::json::parse(tm.model.config().to_json());
  meta["source_vocab"] = user_words(tm.source_vocab);
  meta["target_vocab"] = user_words(tm.target_vocab);
  save_checkpoint(path, tm.model.params(), meta.dump());
}

TranslationModel load_translation_model(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("checkpoint not found: " + path.string());
  std::string metadata;
  ParamStore params = load_checkpoint(path, &metadata);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(metadata);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("checkpoint metadata is not JSON: " + std::string(e.what()));
  }
  if (meta.value("format", "") != kFormat) {
    throw std::runtime_error("not a translation model checkpoint: " + path.string());
  }
  const ModelConfig config = ModelConfig::from_json(meta.at("config").dump());
  const auto src = meta.at("source_vocab").get<std::vector<std::string>>();
  const auto tgt = meta.at("target_vocab").get<std::vector<std::string>>();
  TranslationModel tm{Seq2Seq(config, std::move(params)), Vocab(src), Vocab(tgt)};
  if (tm.source_vocab.size() != config.src_vocab || tm.target_vocab.size() != config.tgt_vocab) {
    throw std::runtime_error("checkpoint vocabularies do not match the model config");
  }
  return tm;
}

}  // namespace imt
