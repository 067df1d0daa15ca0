#include "imt/model/vocab.hpp"

#include <fstream>
#include <stdexcept>

namespace imt {

const std::vector<std::string>& Vocab::reserved_surfaces() {
  static const std::vector<std::string> kReserved = {"<pad>", "<s>", "</s>", "<unk>", "<blank>"};
  return kReserved;
}

Vocab::Vocab() : Vocab(std::span<const std::string>{}) {}

Vocab::Vocab(std::span<const std::string> words) {
  tokens_ = reserved_surfaces();
  for (std::size_t i = 0; i < tokens_.size(); ++i) ids_.emplace(tokens_[i], static_cast<TokenId>(i));
  for (const auto& w : words) {
    if (w.empty()) throw std::invalid_argument("vocab: empty token");
    if (!ids_.emplace(w, static_cast<TokenId>(tokens_.size())).second) {
      throw std::invalid_argument("vocab: duplicate token '" + w + "'");
    }
    tokens_.push_back(w);
  }
}

TokenId Vocab::id(std::string_view surface) const {
  const auto it = ids_.find(std::string(surface));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view surface) const { return ids_.contains(std::string(surface)); }

const std::string& Vocab::surface(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("vocab: id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocab: " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read vocab: " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  const auto& reserved = reserved_surfaces();
  if (lines.size() < reserved.size()) throw std::runtime_error("vocab file missing reserved tokens");
  for (std::size_t i = 0; i < reserved.size(); ++i) {
    if (lines[i] != reserved[i]) throw std::runtime_error("vocab file: bad reserved token at line " + std::to_string(i));
  }
  lines.erase(lines.begin(), lines.begin() + static_cast<std::ptrdiff_t>(reserved.size()));
  return Vocab(lines);
}

TokenId ExtendedVocab::intern(std::string_view surface) {
  if (surface.empty()) throw std::invalid_argument("vocab: empty surface");
  if (base_->contains(surface)) return base_->id(surface);
  const std::string key(surface);
  if (const auto it = extra_ids_.find(key); it != extra_ids_.end()) return it->second;
  const auto id = static_cast<TokenId>(base_->size() + extra_.size());
  extra_.push_back(key);
  extra_ids_.emplace(key, id);
  return id;
}

TokenId ExtendedVocab::lookup(std::string_view surface) const {
  if (base_->contains(surface)) return base_->id(surface);
  const auto it = extra_ids_.find(std::string(surface));
  return it == extra_ids_.end() ? kUnk : it->second;
}

const std::string& ExtendedVocab::surface(TokenId id) const {
  if (!is_extended(id)) return base_->surface(id);
  const auto k = static_cast<std::size_t>(id) - base_->size();
  if (k >= extra_.size()) throw std::out_of_range("extended vocab: id " + std::to_string(id) + " out of range");
  return extra_[k];
}

}  // namespace imt
