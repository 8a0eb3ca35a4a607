#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "amrdia/model.hpp"

namespace amrdia::data {

using model::TokenId;

/// Lowercases, splits on whitespace and emits every ASCII punctuation
/// character as its own token: "Chest pain, doc?" -> chest pain , doc ?
std::vector<std::string> tokenize(std::string_view text);

/// Joins tokens with single spaces.
std::string detokenize(std::span<const std::string> tokens);

/// Token <-> id map with PAD=0, BOS=1, EOS=2, UNK=3 reserved.
class Vocab {
 public:
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kBosToken = "<bos>";
  static constexpr const char* kEosToken = "<eos>";
  static constexpr const char* kUnkToken = "<unk>";

  Vocab();

  /// Frequency-descending, ties lexicographic; tokens seen fewer than
  /// `min_freq` times are left out and encode to UNK.
  static Vocab build(std::span<const std::vector<std::string>> streams, std::size_t min_freq = 1);
  /// Restores a vocabulary from its id-ordered token list (reserved entries included).
  static Vocab from_tokens(std::vector<std::string> tokens);

  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  bool contains(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<TokenId> encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const TokenId> ids) const;

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  void index();

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

}  // namespace amrdia::data
