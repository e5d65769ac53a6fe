#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqfill/distribution.hpp"
#include "seqfill/error.hpp"
#include "seqfill/vocab.hpp"

namespace seqfill {

namespace detail {
struct IdSeqHash {
  std::size_t operator()(const std::vector<TokenId>& v) const {
    std::size_t h = 1469598103934665603ull;
    for (TokenId t : v) {
      h ^= static_cast<std::size_t>(t) + 0x9e3779b97f4a7c15ull;
      h *= 1099511628211ull;
    }
    return h;
  }
};
}  // namespace detail

// Interpolation weights, one entry per component: index 0 is the uniform
// floor, index k the k-gram maximum-likelihood estimate (context of k-1
// tokens). Weight of components whose context was never observed is
// redistributed proportionally across the remaining ones, so the output
// always has full support and sums to 1.
struct NgramSmoothing {
  std::vector<double> order_weights;

  // Uniform floor 0.05, unigram 0.25, and the remaining 0.70 shared evenly
  // by the bigram and higher orders.
  static NgramSmoothing defaults(int order) {
    std::vector<double> w(static_cast<std::size_t>(order) + 1, 0.0);
    if (order == 1) return {{0.05, 0.95}};
    w[0] = 0.05;
    w[1] = 0.25;
    double share = 0.70 / static_cast<double>(order - 1);
    for (int k = 2; k <= order; ++k) w[static_cast<std::size_t>(k)] = share;
    return {w};
  }

  void validate(int order) const {
    if (order_weights.size() != static_cast<std::size_t>(order) + 1)
      throw ConfigError("smoothing needs order+1 weights, got " +
                        std::to_string(order_weights.size()) + " for order " +
                        std::to_string(order));
    double sum = 0.0;
    for (double w : order_weights) {
      if (w < 0.0) throw ConfigError("smoothing weights must be non-negative");
      sum += w;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
      throw ConfigError("smoothing weights must sum to 1");
  }
};

class NgramModel final : public LmScorer {
 public:
  NgramModel(int order, NgramSmoothing smoothing, const Vocabulary* vocab)
      : order_(order), smoothing_(std::move(smoothing)), vocab_(vocab) {
    if (order_ < 1) throw ConfigError("n-gram order must be >= 1");
    smoothing_.validate(order_);
    tables_.resize(static_cast<std::size_t>(order_));
  }

  int order() const { return order_; }
  const NgramSmoothing& smoothing() const { return smoothing_; }
  const Vocabulary& vocab() const { return *vocab_; }

  void add_sequence(std::span<const TokenId> tokens) {
    for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
      std::size_t max_ctx = std::min<std::size_t>(pos, static_cast<std::size_t>(order_ - 1));
      for (std::size_t c = 0; c <= max_ctx; ++c) {
        std::vector<TokenId> ctx(tokens.begin() + static_cast<long>(pos - c),
                                 tokens.begin() + static_cast<long>(pos));
        auto& entry = tables_[c][ctx];
        entry.counts[tokens[pos]] += 1;
        entry.total += 1;
      }
    }
  }

  Distribution next_token_dist(std::span<const TokenId> context) const override {
    const std::size_t n = vocab_->size();
    // Gather the components whose context has been observed.
    std::vector<const ContextEntry*> avail(static_cast<std::size_t>(order_) + 1, nullptr);
    double live_weight = smoothing_.order_weights[0];
    for (int k = 1; k <= order_; ++k) {
      std::size_t c = static_cast<std::size_t>(k - 1);
      if (c > context.size()) break;
      std::vector<TokenId> ctx(context.end() - static_cast<long>(c), context.end());
      auto it = tables_[c].find(ctx);
      if (it != tables_[c].end() && it->second.total > 0) {
        avail[static_cast<std::size_t>(k)] = &it->second;
        live_weight += smoothing_.order_weights[static_cast<std::size_t>(k)];
      }
    }
    Distribution dist(n, smoothing_.order_weights[0] / live_weight / static_cast<double>(n));
    for (int k = 1; k <= order_; ++k) {
      const ContextEntry* e = avail[static_cast<std::size_t>(k)];
      if (!e) continue;
      double w = smoothing_.order_weights[static_cast<std::size_t>(k)] / live_weight;
      if (w == 0.0) continue;
      double total = static_cast<double>(e->total);
      for (const auto& [tok, cnt] : e->counts)
        dist[tok] += w * static_cast<double>(cnt) / total;
    }
    return dist;
  }

  nlohmann::json to_json() const {
    nlohmann::json grams = nlohmann::json::array();
    for (std::size_t c = 0; c < tables_.size(); ++c) {
      for (const auto& [ctx, entry] : tables_[c]) {
        nlohmann::json counts = nlohmann::json::object();
        for (const auto& [tok, cnt] : entry.counts)
          counts[vocab_->token(tok)] = cnt;
        grams.push_back({{"context", context_strings(ctx)}, {"counts", counts}});
      }
    }
    return {{"order", order_},
            {"weights", smoothing_.order_weights},
            {"vocab", vocab_->tokens()},
            {"ngrams", grams}};
  }

  // Rebuilds a model (and its vocabulary) from to_json output.
  static NgramModel from_json(const nlohmann::json& j, Vocabulary& vocab) {
    for (const auto& tok : j.at("vocab")) vocab.add(tok.get<std::string>());
    NgramModel model(j.at("order").get<int>(),
                     NgramSmoothing{j.at("weights").get<std::vector<double>>()}, &vocab);
    for (const auto& g : j.at("ngrams")) {
      std::vector<TokenId> ctx;
      for (const auto& t : g.at("context")) ctx.push_back(vocab.id(t.get<std::string>()));
      auto& entry = model.tables_[ctx.size()][ctx];
      for (const auto& [tok, cnt] : g.at("counts").items()) {
        entry.counts[vocab.id(tok)] += cnt.get<std::int64_t>();
        entry.total += cnt.get<std::int64_t>();
      }
    }
    return model;
  }

 private:
  struct ContextEntry {
    std::unordered_map<TokenId, std::int64_t> counts;
    std::int64_t total = 0;
  };

  std::vector<std::string> context_strings(const std::vector<TokenId>& ctx) const {
    std::vector<std::string> out;
    for (TokenId t : ctx) out.push_back(vocab_->token(t));
    return out;
  }

  int order_;
  NgramSmoothing smoothing_;
  const Vocabulary* vocab_;
  // tables_[c] maps a context of c tokens to its continuation counts.
  std::vector<std::unordered_map<std::vector<TokenId>, ContextEntry, detail::IdSeqHash>>
      tables_;
};

inline NgramModel train_ngram(const std::vector<std::vector<TokenId>>& corpus, int order,
                              NgramSmoothing smoothing, const Vocabulary* vocab) {
  if (corpus.empty()) throw ConfigError("train_ngram: empty corpus");
  NgramModel model(order, std::move(smoothing), vocab);
  for (const auto& seq : corpus) model.add_sequence(seq);
  return model;
}

}  // namespace seqfill
