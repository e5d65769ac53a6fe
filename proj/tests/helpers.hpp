#pragma once

#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "seqfill/candidates.hpp"
#include "seqfill/distribution.hpp"
#include "seqfill/trie.hpp"
#include "seqfill/vocab.hpp"

namespace seqfill::testing {

// Deterministic scorer backed by a lookup table keyed on the context suffix;
// falls back to a fixed default distribution. Deliberately unsmoothed so
// zero-probability paths stay reachable.
class TableScorer final : public LmScorer {
 public:
  explicit TableScorer(Distribution fallback) : fallback_(std::move(fallback)) {}

  void set(std::vector<TokenId> context_suffix, Distribution dist) {
    table_[std::move(context_suffix)] = std::move(dist);
  }

  Distribution next_token_dist(std::span<const TokenId> context) const override {
    // Longest matching suffix wins.
    for (std::size_t len = context.size();; --len) {
      std::vector<TokenId> suffix(context.end() - static_cast<long>(len), context.end());
      auto it = table_.find(suffix);
      if (it != table_.end()) return it->second;
      if (len == 0) break;
    }
    return fallback_;
  }

 private:
  std::map<std::vector<TokenId>, Distribution> table_;
  Distribution fallback_;
};

inline Vocabulary make_vocab(const std::vector<std::string>& words) {
  Vocabulary v;
  for (const auto& w : words) v.add(w);
  return v;
}

inline Distribution random_distribution(std::mt19937& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Distribution d(n);
  double sum = 0.0;
  for (auto& p : d.probs) {
    p = u(rng) + 1e-6;
    sum += p;
  }
  for (auto& p : d.probs) p /= sum;
  return d;
}

// Naive reference for allowed_tokens: filter the tokenized candidate values
// directly, independent of the trie structure.
inline std::vector<TokenId> naive_allowed(const std::vector<std::vector<TokenId>>& values,
                                          std::span<const TokenId> prefix,
                                          const Vocabulary& vocab) {
  std::set<TokenId> out;
  for (const auto& value : values) {
    if (value.size() < prefix.size()) continue;
    bool is_prefix = std::equal(prefix.begin(), prefix.end(), value.begin());
    if (!is_prefix) continue;
    if (value.size() == prefix.size())
      out.insert(vocab.eov());
    else
      out.insert(value[prefix.size()]);
  }
  return {out.begin(), out.end()};
}

}  // namespace seqfill::testing
