#include "amrdia/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "amrdia/error.hpp"

namespace amrdia::data {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      out.emplace_back(1, raw);
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

Vocab::Vocab() : tokens_{kPadToken, kBosToken, kEosToken, kUnkToken} { index(); }

Vocab Vocab::build(std::span<const std::vector<std::string>> streams, std::size_t min_freq) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : streams)
    for (const auto& t : s) ++counts[t];
  if (counts.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot build a vocabulary from an empty corpus");

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // counts is lexicographically ordered, so a stable sort on frequency keeps ties lexicographic.
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocab v;
  for (const auto& [tok, n] : ranked) {
    if (n < std::max<std::size_t>(min_freq, 1)) continue;
    if (v.ids_.count(tok) != 0) continue;  // a literal "<unk>" in the data
    v.tokens_.push_back(tok);
    v.ids_.emplace(tok, v.tokens_.size() - 1);
  }
  return v;
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 4 || tokens[0] != kPadToken || tokens[1] != kBosToken || tokens[2] != kEosToken ||
      tokens[3] != kUnkToken) {
    throw Error(ErrorCode::InvalidConfig, "token list does not start with the reserved tokens");
  }
  Vocab v;
  v.tokens_ = std::move(tokens);
  v.index();
  if (v.ids_.size() != v.tokens_.size()) throw Error(ErrorCode::InvalidConfig, "duplicate token in vocabulary");
  return v;
}

void Vocab::index() {
  ids_.clear();
  for (std::size_t i = 0; i < tokens_.size(); ++i) ids_.emplace(tokens_[i], i);
}

TokenId Vocab::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? model::kUnk : it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id >= tokens_.size()) throw Error(ErrorCode::TokenOutOfVocab, "token id " + std::to_string(id));
  return tokens_[id];
}

bool Vocab::contains(std::string_view token) const { return ids_.count(std::string(token)) != 0; }

std::vector<TokenId> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocab::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId i : ids) out.push_back(token(i));
  return out;
}

}  // namespace amrdia::data
