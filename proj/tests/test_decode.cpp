#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "seqfill/decode.hpp"

using namespace seqfill;
using seqfill::testing::make_vocab;
using seqfill::testing::random_distribution;
using seqfill::testing::TableScorer;

namespace {

CandidateSet set_of(const std::vector<std::string>& values) {
  CandidateSet s;
  for (const auto& v : values) s.add(v, Provenance::kGrammar);
  return s;
}

Distribution uniform(std::size_t n) { return Distribution(n, 1.0 / static_cast<double>(n)); }

}  // namespace

TEST_CASE("rescale restricts and renormalizes") {
  Distribution d(6, 0.0);
  d[2] = 0.1;
  d[4] = 0.3;
  d[5] = 0.6;
  Distribution r = rescale(d, {4, 5});
  REQUIRE(r[4] == Catch::Approx(0.3 / 0.9));
  REQUIRE(r[5] == Catch::Approx(0.6 / 0.9));
  REQUIRE(r[2] == 0.0);
  REQUIRE(r.valid());
}

TEST_CASE("rescale over the full support is the identity") {
  std::mt19937 rng(5);
  Distribution d = random_distribution(rng, 8);
  std::vector<TokenId> all;
  for (TokenId t = 0; t < 8; ++t) all.push_back(t);
  Distribution r = rescale(d, all);
  for (std::size_t i = 0; i < d.size(); ++i) REQUIRE(r.probs[i] == Catch::Approx(d.probs[i]));
}

TEST_CASE("rescale is invariant to scaling the unnormalized scores") {
  std::mt19937 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    Distribution d = random_distribution(rng, 10);
    Distribution scaled = d;
    for (auto& p : scaled.probs) p *= 3.7;
    std::vector<TokenId> allowed{1, 4, 7};
    Distribution r1 = rescale(d, allowed);
    Distribution r2 = rescale(scaled, allowed);
    for (std::size_t i = 0; i < r1.size(); ++i)
      REQUIRE(r1.probs[i] == Catch::Approx(r2.probs[i]));
  }
}

TEST_CASE("rescale with zero allowed mass falls back to uniform and flags it") {
  Distribution d(5, 0.0);
  d[0] = 1.0;
  bool degenerate = false;
  Distribution r = rescale(d, {2, 3}, &degenerate);
  REQUIRE(degenerate);
  REQUIRE(r[2] == Catch::Approx(0.5));
  REQUIRE(r[3] == Catch::Approx(0.5));
}

TEST_CASE("rescale with an empty allowed set throws") {
  Distribution d = uniform(4);
  REQUIRE_THROWS_AS(rescale(d, {}), DecodeError);
}

TEST_CASE("ensemble boundaries recover the individual models") {
  std::mt19937 rng(7);
  Distribution few = random_distribution(rng, 9);
  Distribution zero = random_distribution(rng, 9);
  Distribution at1 = ensemble_step(few, zero, 1.0);
  Distribution at0 = ensemble_step(few, zero, 0.0);
  REQUIRE(at1.probs == few.probs);
  REQUIRE(at0.probs == zero.probs);
}

TEST_CASE("ensemble output is a valid convex combination") {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    Distribution few = random_distribution(rng, 7);
    Distribution zero = random_distribution(rng, 7);
    double gamma = (trial % 21) * 0.05;
    Distribution mix = ensemble_step(few, zero, gamma);
    REQUIRE(mix.valid());
    for (std::size_t i = 0; i < mix.size(); ++i) {
      REQUIRE(mix.probs[i] >= std::min(few.probs[i], zero.probs[i]) - 1e-15);
      REQUIRE(mix.probs[i] <= std::max(few.probs[i], zero.probs[i]) + 1e-15);
    }
  }
}

TEST_CASE("margin and ratio of confidence on a known distribution") {
  Distribution d(4, 0.0);
  d[0] = 0.6;
  d[1] = 0.3;
  d[2] = 0.1;
  REQUIRE(moc(d) == Catch::Approx(1.0 - (0.6 - 0.3)));
  REQUIRE(roc(d) == Catch::Approx(0.3 / 0.6));
}

TEST_CASE("both confidence metrics peak when the top two probabilities tie") {
  Distribution d(3, 0.0);
  d[0] = 0.5;
  d[1] = 0.5;
  REQUIRE(moc(d) == Catch::Approx(1.0));
  REQUIRE(roc(d) == Catch::Approx(1.0));
  REQUIRE_THROWS_AS(roc(Distribution(3, 0.0)), DecodeError);
}

TEST_CASE("gamma = 1 ignores the constraint entirely") {
  Vocabulary v = make_vocab({"a", "b"});
  Distribution d(v.size(), 0.0);
  d[v.id("b")] = 1.0;  // few-shot always says "b", never EOV
  TableScorer few(d);
  Distribution eov(v.size(), 0.0);
  eov[v.eov()] = 1.0;
  few.set({v.id("b")}, eov);

  CandidateTrie trie = build_trie(set_of({"a"}), v);  // excludes "b"
  EnsembleConfig cfg;
  cfg.gamma = 1.0;
  DecodeOutcome out = decode_value(few, nullptr, trie, {}, cfg, v);
  REQUIRE(out.ended_with_eov);
  REQUIRE(out.tokens == std::vector<TokenId>{v.id("b")});
  REQUIRE_FALSE(out.matched_value.has_value());
}

TEST_CASE("gamma = 0 follows the constrained zero-shot model") {
  Vocabulary v = make_vocab({"a", "b"});
  // Few-shot prefers "b"; zero-shot prefers "b" too, but the trie only
  // contains "a", so the rescaled zero-shot mass lands on "a".
  Distribution few_d(v.size(), 0.0);
  few_d[v.id("b")] = 1.0;
  TableScorer few(few_d);
  Distribution zero_d(v.size(), 0.0);
  zero_d[v.id("b")] = 0.7;
  zero_d[v.id("a")] = 0.2;
  zero_d[v.eov()] = 0.1;
  TableScorer zero(zero_d);

  CandidateTrie trie = build_trie(set_of({"a"}), v);
  EnsembleConfig cfg;
  cfg.gamma = 0.0;
  DecodeOutcome out = decode_value(few, &zero, trie, {}, cfg, v);
  REQUIRE(out.ended_with_eov);
  REQUIRE(out.matched_value == std::string("a"));
  REQUIRE_FALSE(out.off_trie);
}

TEST_CASE("a single candidate is forced regardless of the models") {
  Vocabulary v = make_vocab({"price", ">", "<", "100"});
  TableScorer few(Distribution(v.size(), 1.0 / static_cast<double>(v.size())));
  TableScorer zero(Distribution(v.size(), 1.0 / static_cast<double>(v.size())));
  CandidateTrie trie = build_trie(set_of({"price > 100"}), v);
  EnsembleConfig cfg;
  cfg.gamma = 0.0;
  DecodeOutcome out = decode_value(few, &zero, trie, {}, cfg, v);
  REQUIRE(out.matched_value == std::string("price > 100"));
  REQUIRE(out.degenerate_rescale == false);
}

TEST_CASE("an off-trie ensembled argmax disables the zero-shot path and is flagged") {
  Vocabulary v = make_vocab({"a", "b"});
  Distribution few_d(v.size(), 0.0);
  few_d[v.id("b")] = 1.0;  // dominates any mixture at gamma close to 1
  TableScorer few(few_d);
  Distribution eov(v.size(), 0.0);
  eov[v.eov()] = 1.0;
  few.set({v.id("b")}, eov);
  TableScorer zero(Distribution(v.size(), 1.0 / static_cast<double>(v.size())));

  CandidateTrie trie = build_trie(set_of({"a"}), v);
  EnsembleConfig cfg;
  cfg.gamma = 0.9;
  DecodeOutcome out = decode_value(few, &zero, trie, {}, cfg, v);
  REQUIRE(out.off_trie);
  REQUIRE(out.tokens == std::vector<TokenId>{v.id("b")});
  REQUIRE_FALSE(out.matched_value.has_value());
}

TEST_CASE("decoding against an empty trie with an active constraint throws") {
  Vocabulary v = make_vocab({"a"});
  TableScorer few(Distribution(v.size(), 1.0 / static_cast<double>(v.size())));
  TableScorer zero(Distribution(v.size(), 1.0 / static_cast<double>(v.size())));
  CandidateTrie empty;
  EnsembleConfig cfg;
  cfg.gamma = 0.5;
  REQUIRE_THROWS_AS(decode_value(few, &zero, empty, {}, cfg, v), DecodeError);
  REQUIRE_THROWS_AS(decode_value(few, nullptr, empty, {}, cfg, v), ConfigError);
}

TEST_CASE("max value length caps the number of emitted tokens") {
  Vocabulary v = make_vocab({"a"});
  Distribution d(v.size(), 0.0);
  d[v.id("a")] = 1.0;  // never emits EOV
  TableScorer few(d);
  CandidateTrie trie;
  EnsembleConfig cfg;
  cfg.gamma = 1.0;
  cfg.max_value_len = 4;
  DecodeOutcome out = decode_value(few, nullptr, trie, {}, cfg, v);
  REQUIRE_FALSE(out.ended_with_eov);
  REQUIRE(out.tokens.size() == 4);
  REQUIRE(out.steps.size() == 4);
}

TEST_CASE("selection by uncertainty prefers the zero value under high uncertainty") {
  Distribution confident(4, 0.0);
  confident[0] = 0.9;
  confident[1] = 0.1;
  Distribution unsure(4, 0.0);
  unsure[0] = 0.5;
  unsure[1] = 0.5;
  std::vector<TokenId> few_value{1};
  std::vector<TokenId> zero_value{2};
  // MoC of the confident dist is 0.2 <= 0.5: zero value wins.
  REQUIRE(select_by_uncertainty(confident, UncertaintyMode::kMoC, 0.5, few_value, zero_value) ==
          zero_value);
  // MoC of the tied dist is 1.0 > 0.5: few value wins.
  REQUIRE(select_by_uncertainty(unsure, UncertaintyMode::kMoC, 0.5, few_value, zero_value) ==
          few_value);
  REQUIRE(select_by_uncertainty(confident, UncertaintyMode::kRoC, 0.2, few_value, zero_value) ==
          zero_value);
  REQUIRE_THROWS_AS(
      select_by_uncertainty(confident, UncertaintyMode::kOff, 0.5, few_value, zero_value),
      ConfigError);
}

TEST_CASE("invalid ensemble configuration is rejected") {
  EnsembleConfig cfg;
  cfg.gamma = 1.5;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  cfg.gamma = 0.5;
  cfg.max_value_len = 0;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
}
