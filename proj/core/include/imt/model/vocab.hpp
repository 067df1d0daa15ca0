#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace imt {

using TokenId = int;

/// Reserved ids shared by every vocabulary. kBlank is the "spacing" token a
/// deletion pins in place of the removed word; it renders as nothing.
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kBlank = 4;
inline constexpr int kReservedCount = 5;

class Vocab {
 public:
  /// Vocabulary holding only the reserved tokens.
  Vocab();
  /// Reserved tokens followed by `words` in order. Duplicates and reserved
  /// surfaces in `words` are rejected.
  explicit Vocab(std::span<const std::string> words);

  static const std::vector<std::string>& reserved_surfaces();

  std::size_t size() const { return tokens_.size(); }
  TokenId id(std::string_view surface) const;
  bool contains(std::string_view surface) const;
  const std::string& surface(TokenId id) const;

  std::vector<TokenId> encode(std::span<const std::string> tokens) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// One token per line, line number == id.
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

/// A vocabulary extended with out-of-vocabulary surfaces seen during one
/// session. Extended surfaces get ids vocab.size(), vocab.size() + 1, ...;
/// the model can only express them as UNK.
class ExtendedVocab {
 public:
  explicit ExtendedVocab(const Vocab& base) : base_(&base) {}

  const Vocab& base() const { return *base_; }
  std::size_t size() const { return base_->size() + extra_.size(); }
  std::size_t extended_count() const { return extra_.size(); }
  bool is_extended(TokenId id) const { return id >= static_cast<TokenId>(base_->size()); }

  /// In-vocabulary id, existing extended id, or a newly assigned extended id.
  TokenId intern(std::string_view surface);
  /// Like intern but never assigns: unknown surfaces map to UNK.
  TokenId lookup(std::string_view surface) const;
  const std::string& surface(TokenId id) const;
  const std::vector<std::string>& extended_surfaces() const { return extra_; }

 private:
  const Vocab* base_;
  std::vector<std::string> extra_;
  std::unordered_map<std::string, TokenId> extra_ids_;
};

}  // namespace imt
