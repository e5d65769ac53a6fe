#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "seqfill/error.hpp"
#include "seqfill/vocab.hpp"

namespace seqfill {

// Dense per-step probability vector over the vocabulary.
struct Distribution {
  std::vector<double> probs;

  Distribution() = default;
  explicit Distribution(std::size_t n, double fill = 0.0) : probs(n, fill) {}

  std::size_t size() const { return probs.size(); }
  double operator[](TokenId id) const { return probs[static_cast<std::size_t>(id)]; }
  double& operator[](TokenId id) { return probs[static_cast<std::size_t>(id)]; }

  double sum() const {
    double s = 0.0;
    for (double p : probs) s += p;
    return s;
  }

  bool valid(double tol = 1e-9) const {
    for (double p : probs)
      if (p < 0.0 || !std::isfinite(p)) return false;
    return std::fabs(sum() - 1.0) <= tol;
  }

  // Ties broken by lowest token id.
  TokenId argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i)
      if (probs[i] > probs[best]) best = i;
    return static_cast<TokenId>(best);
  }

  // Largest and second-largest entries.
  void top2(double& p1, double& p2) const {
    p1 = -1.0;
    p2 = -1.0;
    for (double p : probs) {
      if (p > p1) {
        p2 = p1;
        p1 = p;
      } else if (p > p2) {
        p2 = p;
      }
    }
  }
};

// Autoregressive scoring contract shared by the n-gram backend and the
// remote client.
class LmScorer {
 public:
  virtual ~LmScorer() = default;
  virtual Distribution next_token_dist(std::span<const TokenId> context) const = 0;
};

// Log-probability of `tokens` continuing `context`, chain-rule factored.
inline double score_continuation(const LmScorer& model,
                                 std::span<const TokenId> context,
                                 std::span<const TokenId> tokens) {
  std::vector<TokenId> ctx(context.begin(), context.end());
  double total = 0.0;
  for (TokenId t : tokens) {
    Distribution d = model.next_token_dist(ctx);
    double p = d[t];
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    total += std::log(p);
    ctx.push_back(t);
  }
  return total;
}

inline double score_sequence(const LmScorer& model, std::span<const TokenId> tokens) {
  if (tokens.empty()) throw ScoringError("score_sequence: empty token sequence");
  return score_continuation(model, {}, tokens);
}

}  // namespace seqfill
