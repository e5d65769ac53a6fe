#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "seqfill/distribution.hpp"
#include "seqfill/error.hpp"
#include "seqfill/vocab.hpp"

namespace seqfill {

// Client for plugging in an external neural LM over HTTP.
//
// Wire protocol, POST /score:
//   request  {"context": ["token", ...], "top_k": int}
//   response {"probs": {"token": float, ...}}
//
// A response may be sparse (top-k); it is completed to a full distribution
// by spreading the residual mass uniformly over unlisted tokens.
class RemoteLmClient final : public LmScorer {
 public:
  RemoteLmClient(std::string host, int port, const Vocabulary* vocab, int top_k = 0,
                 int timeout_seconds = 10)
      : host_(std::move(host)), port_(port), vocab_(vocab), top_k_(top_k),
        timeout_seconds_(timeout_seconds) {}

  // Optional remapping of remote token strings to local tokens; unmapped
  // strings fall back to a direct vocabulary lookup.
  void map_token(const std::string& remote, const std::string& local) {
    mapping_[remote] = vocab_->id(local);
  }

  std::string endpoint() const { return host_ + ":" + std::to_string(port_); }

  Distribution next_token_dist(std::span<const TokenId> context) const override {
    nlohmann::json req;
    req["context"] = nlohmann::json::array();
    for (TokenId t : context) req["context"].push_back(vocab_->token(t));
    req["top_k"] = top_k_;

    httplib::Client client(host_, port_);
    client.set_connection_timeout(timeout_seconds_);
    client.set_read_timeout(timeout_seconds_);
    auto res = client.Post("/score", req.dump(), "application/json");
    if (!res || res->status != 200)
      throw ScoringError(transport_message(context.size(),
                                           res ? "status " + std::to_string(res->status)
                                               : "transport failure"));

    nlohmann::json body;
    try {
      body = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception&) {
      throw ScoringError(transport_message(context.size(), "malformed response body"));
    }
    if (!body.contains("probs") || !body["probs"].is_object())
      throw ScoringError(transport_message(context.size(), "missing probs object"));

    Distribution dist(vocab_->size(), 0.0);
    std::vector<bool> listed(vocab_->size(), false);
    double listed_mass = 0.0;
    for (const auto& [tok, p] : body["probs"].items()) {
      if (!p.is_number())
        throw ScoringError(transport_message(context.size(), "non-numeric probability"));
      double prob = p.get<double>();
      if (prob < 0.0)
        throw ScoringError(transport_message(context.size(), "negative probability"));
      auto it = mapping_.find(tok);
      TokenId id = it != mapping_.end() ? it->second : vocab_->id(tok);
      if (id == vocab_->unk() && !vocab_->contains(tok) && it == mapping_.end())
        continue;  // remote token outside the local vocabulary
      dist[id] += prob;
      listed[static_cast<std::size_t>(id)] = true;
      listed_mass += prob;
    }
    if (listed_mass > 1.0 + 1e-6)
      throw ScoringError(transport_message(context.size(), "probabilities exceed 1"));

    std::size_t unlisted = 0;
    for (bool b : listed)
      if (!b) ++unlisted;
    double residual = 1.0 - listed_mass;
    if (residual < 0.0) residual = 0.0;
    if (unlisted > 0) {
      double share = residual / static_cast<double>(unlisted);
      for (std::size_t i = 0; i < listed.size(); ++i)
        if (!listed[i]) dist.probs[i] = share;
    } else if (std::fabs(residual) > 1e-6) {
      throw ScoringError(transport_message(context.size(), "full response does not sum to 1"));
    }
    if (!dist.valid(1e-6))
      throw ScoringError(transport_message(context.size(), "completed distribution invalid"));
    // Remove the small completion slack so downstream sum checks hold.
    double s = dist.sum();
    for (double& p : dist.probs) p /= s;
    return dist;
  }

 private:
  std::string transport_message(std::size_t ctx_len, const std::string& what) const {
    return "remote lm " + endpoint() + " (context length " + std::to_string(ctx_len) +
           "): " + what;
  }

  std::string host_;
  int port_;
  const Vocabulary* vocab_;
  int top_k_;
  int timeout_seconds_;
  std::unordered_map<std::string, TokenId> mapping_;
};

}  // namespace seqfill
