#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqfill/candidates.hpp"
#include "seqfill/error.hpp"
#include "seqfill/vocab.hpp"

namespace seqfill {

// Prefix tree over tokenized candidate values; source of the allowed-token
// set at every decode step. Immutable after build.
class CandidateTrie {
 public:
  static CandidateTrie build(const CandidateSet& cands, const Vocabulary& vocab) {
    CandidateTrie trie;
    trie.vocab_ = &vocab;
    trie.nodes_.emplace_back();
    for (const auto& [value, provenance] : cands.values) {
      (void)provenance;
      std::vector<TokenId> toks = tokenize(value, vocab);
      if (toks.empty())
        throw ConfigError("candidate tokenizes to nothing: '" + value + "'");
      for (TokenId t : toks)
        if (t == vocab.unk())
          throw ConfigError("candidate contains out-of-vocabulary token: '" + value + "'");
      int node = 0;
      for (TokenId t : toks) {
        auto it = trie.nodes_[static_cast<std::size_t>(node)].children.find(t);
        if (it == trie.nodes_[static_cast<std::size_t>(node)].children.end()) {
          int next = static_cast<int>(trie.nodes_.size());
          trie.nodes_[static_cast<std::size_t>(node)].children.emplace(t, next);
          trie.nodes_.emplace_back();
          node = next;
        } else {
          node = it->second;
        }
      }
      auto& terminal = trie.nodes_[static_cast<std::size_t>(node)];
      if (terminal.value_index < 0) {
        terminal.value_index = static_cast<int>(trie.values_.size());
        trie.values_.push_back(value);
      }
    }
    return trie;
  }

  // Tokens that extend `prefix` toward some candidate, plus end-of-value when
  // the prefix is itself a complete candidate. Empty set for unmatched
  // prefixes. Sorted by token id.
  std::vector<TokenId> allowed_tokens(std::span<const TokenId> prefix) const {
    int node = walk(prefix);
    if (node < 0) return {};
    const Node& n = nodes_[static_cast<std::size_t>(node)];
    std::vector<TokenId> out;
    bool eov_emitted = false;
    for (const auto& [tok, child] : n.children) {
      (void)child;
      if (!eov_emitted && n.value_index >= 0 && vocab_->eov() < tok) {
        out.push_back(vocab_->eov());
        eov_emitted = true;
      }
      out.push_back(tok);
    }
    if (!eov_emitted && n.value_index >= 0) out.push_back(vocab_->eov());
    return out;
  }

  // Original candidate string for a complete token path, if any.
  std::optional<std::string> match(std::span<const TokenId> tokens) const {
    int node = walk(tokens);
    if (node < 0) return std::nullopt;
    int idx = nodes_[static_cast<std::size_t>(node)].value_index;
    if (idx < 0) return std::nullopt;
    return values_[static_cast<std::size_t>(idx)];
  }

  bool accepts(std::span<const TokenId> tokens) const { return match(tokens).has_value(); }

  bool empty() const { return values_.empty(); }
  std::size_t value_count() const { return values_.size(); }
  const std::vector<std::string>& values() const { return values_; }

 private:
  struct Node {
    std::map<TokenId, int> children;
    int value_index = -1;
  };

  int walk(std::span<const TokenId> prefix) const {
    if (nodes_.empty()) return -1;
    int node = 0;
    for (TokenId t : prefix) {
      const auto& children = nodes_[static_cast<std::size_t>(node)].children;
      auto it = children.find(t);
      if (it == children.end()) return -1;
      node = it->second;
    }
    return node;
  }

  std::vector<Node> nodes_;
  std::vector<std::string> values_;
  const Vocabulary* vocab_ = nullptr;
};

inline CandidateTrie build_trie(const CandidateSet& cands, const Vocabulary& vocab) {
  return CandidateTrie::build(cands, vocab);
}

}  // namespace seqfill
