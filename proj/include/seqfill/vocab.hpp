#pragma once

#include <cctype>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqfill/error.hpp"

namespace seqfill {

using TokenId = std::int32_t;

// Integer-coded token space shared by every model in one pipeline run.
// The first four ids are reserved for the special markers.
class Vocabulary {
 public:
  static constexpr const char* kBos = "<s>";
  static constexpr const char* kEos = "</s>";
  static constexpr const char* kUnk = "<unk>";
  static constexpr const char* kEov = "<eov>";

  Vocabulary() {
    add(kBos);
    add(kEos);
    add(kUnk);
    add(kEov);
  }

  TokenId bos() const { return 0; }
  TokenId eos() const { return 1; }
  TokenId unk() const { return 2; }
  TokenId eov() const { return 3; }

  std::size_t size() const { return tokens_.size(); }

  // Returns the id of an existing token, inserting it if absent.
  TokenId add(const std::string& token) {
    auto it = ids_.find(token);
    if (it != ids_.end()) return it->second;
    TokenId id = static_cast<TokenId>(tokens_.size());
    tokens_.push_back(token);
    ids_.emplace(token, id);
    return id;
  }

  // Lookup without insertion; unknown words map to the unk marker.
  TokenId id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? unk() : it->second;
  }

  bool contains(const std::string& token) const { return ids_.count(token) > 0; }

  const std::string& token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
      throw ScoringError("token id out of range: " + std::to_string(id));
    return tokens_[static_cast<std::size_t>(id)];
  }

  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

namespace detail {
inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}
}  // namespace detail

// Lowercase, whitespace split, punctuation separated as standalone tokens.
inline std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (char raw : text) {
    char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) {
        words.push_back(cur);
        cur.clear();
      }
    } else if (detail::is_word_char(c)) {
      cur.push_back(c);
    } else {
      if (!cur.empty()) {
        words.push_back(cur);
        cur.clear();
      }
      words.push_back(std::string(1, c));
    }
  }
  if (!cur.empty()) words.push_back(cur);
  return words;
}

inline std::vector<TokenId> tokenize(const std::string& text, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  for (const auto& w : split_words(text)) ids.push_back(vocab.id(w));
  return ids;
}

// Inverse of tokenize up to case. Double quotes attach to their contents so
// values like `state_name = "utah"` survive a round trip.
inline std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::string out;
  bool in_quote = false;
  bool suppress_space = false;
  for (TokenId id : ids) {
    const std::string& tok = vocab.token(id);
    if (tok == "\"") {
      if (!in_quote) {
        if (!out.empty()) out.push_back(' ');
        out.push_back('"');
        in_quote = true;
        suppress_space = true;
      } else {
        out.push_back('"');
        in_quote = false;
      }
      continue;
    }
    if (!out.empty() && !suppress_space) out.push_back(' ');
    out += tok;
    suppress_space = false;
  }
  return out;
}

inline bool is_numeral(const std::string& word) {
  if (word.empty()) return false;
  for (char c : word)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

}  // namespace seqfill
