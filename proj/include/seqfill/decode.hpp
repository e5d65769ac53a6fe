#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqfill/distribution.hpp"
#include "seqfill/error.hpp"
#include "seqfill/trie.hpp"
#include "seqfill/vocab.hpp"

namespace seqfill {

enum class UncertaintyMode { kOff, kMoC, kRoC };

struct EnsembleConfig {
  double gamma = 1.0;          // weight of the few-shot model
  int max_value_len = 16;
  UncertaintyMode uncertainty = UncertaintyMode::kOff;
  double uncertainty_threshold = 0.5;

  void validate() const {
    if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must lie in [0,1]");
    if (max_value_len < 1) throw ConfigError("max value length must be >= 1");
  }
};

// Restriction of `dist` to `allowed`, renormalized. When the allowed mass is
// zero the result falls back to uniform over `allowed` and *degenerate is set.
inline Distribution rescale(const Distribution& dist, const std::vector<TokenId>& allowed,
                            bool* degenerate = nullptr) {
  if (allowed.empty()) throw DecodeError("rescale: constraint exhausted (empty allowed set)");
  if (degenerate) *degenerate = false;
  double mass = 0.0;
  for (TokenId t : allowed) mass += dist[t];
  Distribution out(dist.size(), 0.0);
  if (mass <= 0.0) {
    if (degenerate) *degenerate = true;
    double share = 1.0 / static_cast<double>(allowed.size());
    for (TokenId t : allowed) out[t] = share;
    return out;
  }
  for (TokenId t : allowed) out[t] = dist[t] / mass;
  return out;
}

inline Distribution ensemble_step(const Distribution& few, const Distribution& zero_rescaled,
                                  double gamma) {
  if (few.size() != zero_rescaled.size())
    throw DecodeError("ensemble_step: distribution size mismatch");
  if (gamma < 0.0 || gamma > 1.0) throw DecodeError("ensemble_step: gamma outside [0,1]");
  Distribution out(few.size());
  for (std::size_t i = 0; i < few.size(); ++i)
    out.probs[i] = gamma * few.probs[i] + (1.0 - gamma) * zero_rescaled.probs[i];
  return out;
}

// Margin of confidence: 1 - (p1 - p2).
inline double moc(const Distribution& dist) {
  if (dist.size() < 2) throw DecodeError("moc: need at least 2 support points");
  double p1, p2;
  dist.top2(p1, p2);
  return 1.0 - (p1 - p2);
}

// Ratio of confidence: p2 / p1.
inline double roc(const Distribution& dist) {
  if (dist.size() < 2) throw DecodeError("roc: need at least 2 support points");
  double p1, p2;
  dist.top2(p1, p2);
  if (p1 <= 0.0) throw DecodeError("roc: undefined confidence (top probability is 0)");
  return p2 / p1;
}

// Full record of one decode step.
struct StepRecord {
  int index = 0;
  Distribution few;
  std::optional<Distribution> zero_rescaled;
  Distribution ensembled;
  TokenId chosen = 0;
  bool degenerate_rescale = false;
  bool off_trie = false;  // chosen token fell outside the allowed set
};

struct DecodeOutcome {
  std::vector<TokenId> tokens;
  std::vector<StepRecord> steps;
  bool ended_with_eov = false;
  bool off_trie = false;          // zero-shot path was disabled mid-value
  bool degenerate_rescale = false;
  std::optional<std::string> matched_value;  // original candidate string, if on-trie
};

// Greedy constrained decoding of one slot value. The few-shot distribution is
// used unconstrained; only the zero-shot distribution is restricted to the
// trie. An ensembled argmax outside the allowed set disables the zero-shot
// path for the rest of the value and flags the event.
inline DecodeOutcome decode_value(const LmScorer& few_model, const LmScorer* zero_model,
                                  const CandidateTrie& trie, std::span<const TokenId> context,
                                  const EnsembleConfig& cfg, const Vocabulary& vocab) {
  cfg.validate();
  if (cfg.gamma < 1.0 && zero_model == nullptr)
    throw ConfigError("decode_value: gamma < 1 requires a zero-shot model");

  DecodeOutcome out;
  std::vector<TokenId> ctx(context.begin(), context.end());
  std::vector<TokenId>& prefix = out.tokens;
  bool zero_active = cfg.gamma < 1.0;
  if (zero_active && trie.empty())
    throw DecodeError("decode_value: empty candidate trie");

  for (int step = 0; step < cfg.max_value_len; ++step) {
    std::vector<TokenId> full_ctx = ctx;
    full_ctx.insert(full_ctx.end(), prefix.begin(), prefix.end());

    StepRecord rec;
    rec.index = step;
    rec.few = few_model.next_token_dist(full_ctx);

    std::vector<TokenId> allowed;
    if (zero_active) {
      allowed = trie.allowed_tokens(prefix);
      if (allowed.empty()) {
        if (prefix.empty())
          throw DecodeError("decode_value: constraint exhausted before any token");
        zero_active = false;
        out.off_trie = true;
      }
    }
    if (zero_active) {
      Distribution zero_raw = zero_model->next_token_dist(full_ctx);
      bool degen = false;
      rec.zero_rescaled = rescale(zero_raw, allowed, &degen);
      rec.degenerate_rescale = degen;
      out.degenerate_rescale = out.degenerate_rescale || degen;
      rec.ensembled = ensemble_step(rec.few, *rec.zero_rescaled, cfg.gamma);
    } else {
      rec.ensembled = rec.few;
    }

    TokenId chosen = rec.ensembled.argmax();
    rec.chosen = chosen;
    if (zero_active && !std::binary_search(allowed.begin(), allowed.end(), chosen)) {
      rec.off_trie = true;
      out.off_trie = true;
      zero_active = false;
    }
    out.steps.push_back(std::move(rec));

    if (chosen == vocab.eov()) {
      out.ended_with_eov = true;
      break;
    }
    prefix.push_back(chosen);
  }

  if (out.ended_with_eov) out.matched_value = trie.match(prefix);
  return out;
}

// Picks the zero-shot value when the rescaled zero-shot distribution at the
// first value step is confident enough, the few-shot value otherwise.
inline std::vector<TokenId> select_by_uncertainty(const Distribution& zero_rescaled_at_first,
                                                  UncertaintyMode mode, double threshold,
                                                  const std::vector<TokenId>& few_value,
                                                  const std::vector<TokenId>& zero_value) {
  double metric;
  switch (mode) {
    case UncertaintyMode::kMoC: metric = moc(zero_rescaled_at_first); break;
    case UncertaintyMode::kRoC: metric = roc(zero_rescaled_at_first); break;
    default: throw ConfigError("select_by_uncertainty: mode must be MoC or RoC");
  }
  return metric <= threshold ? zero_value : few_value;
}

}  // namespace seqfill
