#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "seqfill/trie.hpp"

using namespace seqfill;
using seqfill::testing::make_vocab;
using seqfill::testing::naive_allowed;

namespace {

CandidateSet set_of(const std::vector<std::string>& values) {
  CandidateSet s;
  for (const auto& v : values) s.add(v, Provenance::kGrammar);
  return s;
}

}  // namespace

TEST_CASE("allowed tokens at the root are the candidate first tokens") {
  Vocabulary v = make_vocab({"price", "size", "delivery", ">", "<", "=", "100", "fast"});
  CandidateTrie trie = build_trie(set_of({"price > 100", "price < 100", "size > 100",
                                          "delivery = fast"}),
                                  v);
  auto allowed = trie.allowed_tokens({});
  REQUIRE(allowed == std::vector<TokenId>{v.id("price"), v.id("size"), v.id("delivery")});
}

TEST_CASE("shared prefixes branch and end-of-value marks complete candidates") {
  Vocabulary v = make_vocab({"price", ">", "<", "100"});
  CandidateTrie trie = build_trie(set_of({"price", "price > 100", "price < 100"}), v);
  std::vector<TokenId> p{v.id("price")};
  auto allowed = trie.allowed_tokens(p);
  // "price" is itself complete, so EOV joins the branch tokens; sorted by id.
  std::vector<TokenId> expect{v.eov(), v.id(">"), v.id("<")};
  std::sort(expect.begin(), expect.end());
  REQUIRE(allowed == expect);

  std::vector<TokenId> full{v.id("price"), v.id(">"), v.id("100")};
  REQUIRE(trie.allowed_tokens(full) == std::vector<TokenId>{v.eov()});
  REQUIRE(trie.match(full) == std::string("price > 100"));
  REQUIRE(trie.accepts(p));
}

TEST_CASE("unmatched prefixes yield the empty set") {
  Vocabulary v = make_vocab({"a", "b", "c"});
  CandidateTrie trie = build_trie(set_of({"a b"}), v);
  std::vector<TokenId> bad{v.id("c")};
  REQUIRE(trie.allowed_tokens(bad).empty());
  REQUIRE_FALSE(trie.match(bad).has_value());
}

TEST_CASE("incomplete paths do not match") {
  Vocabulary v = make_vocab({"a", "b"});
  CandidateTrie trie = build_trie(set_of({"a b"}), v);
  std::vector<TokenId> p{v.id("a")};
  REQUIRE_FALSE(trie.match(p).has_value());
  REQUIRE(trie.allowed_tokens(p) == std::vector<TokenId>{v.id("b")});
}

TEST_CASE("terminal strings come back verbatim, not retokenized") {
  Vocabulary v = make_vocab({"delivery", "=", "\"", "fast"});
  CandidateTrie trie = build_trie(set_of({"delivery = \"fast\""}), v);
  auto toks = tokenize("delivery = \"fast\"", v);
  REQUIRE(trie.match(toks) == std::string("delivery = \"fast\""));
}

TEST_CASE("out-of-vocabulary candidates are rejected at build time") {
  Vocabulary v = make_vocab({"a"});
  REQUIRE_THROWS_AS(build_trie(set_of({"zzz"}), v), ConfigError);
}

TEST_CASE("default trie is empty, built trie is not") {
  Vocabulary v = make_vocab({"a"});
  CandidateTrie fresh;
  REQUIRE(fresh.empty());
  CandidateTrie trie = build_trie(set_of({"a"}), v);
  REQUIRE_FALSE(trie.empty());
  REQUIRE(trie.value_count() == 1);
}

TEST_CASE("allowed_tokens agrees with the direct candidate filter") {
  std::vector<std::string> words;
  for (char c = 'a'; c <= 'h'; ++c) words.emplace_back(1, c);
  Vocabulary v = make_vocab(words);
  std::mt19937 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    // Random candidate set of 1..8 values, each 1..5 tokens.
    CandidateSet cands;
    std::vector<std::vector<TokenId>> tokenized;
    int n = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) {
      int len = 1 + static_cast<int>(rng() % 5);
      std::string value;
      for (int j = 0; j < len; ++j) {
        if (j) value += " ";
        value += words[rng() % words.size()];
      }
      cands.add(value, Provenance::kGrammar);
    }
    for (const auto& [value, p] : cands.values) {
      (void)p;
      tokenized.push_back(tokenize(value, v));
    }
    CandidateTrie trie = build_trie(cands, v);
    // Probe the empty prefix, every candidate prefix, and a random prefix.
    std::vector<std::vector<TokenId>> probes{{}};
    for (const auto& t : tokenized)
      for (std::size_t len = 1; len <= t.size(); ++len)
        probes.emplace_back(t.begin(), t.begin() + static_cast<long>(len));
    std::vector<TokenId> random_probe;
    for (int j = 0; j < 3; ++j)
      random_probe.push_back(static_cast<TokenId>(4 + rng() % words.size()));
    probes.push_back(random_probe);

    for (const auto& probe : probes) {
      auto got = trie.allowed_tokens(probe);
      auto want = naive_allowed(tokenized, probe, v);
      REQUIRE(got == want);
    }
  }
}
