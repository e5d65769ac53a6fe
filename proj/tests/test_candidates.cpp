#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "helpers.hpp"
#include "seqfill/candidates.hpp"

using namespace seqfill;

namespace {

ClauseSpec condition_spec() {
  ClauseSpec spec;
  spec.id = "condition";
  spec.rule = ClauseRule::kCondition;
  spec.nullable = true;
  spec.sources = {.grammar = true, .training_data = true};
  spec.grammar_terminals = {"price > <num>", "price < <num>", "delivery = fast"};
  return spec;
}

}  // namespace

TEST_CASE("candidates union all declared sources with provenance tags") {
  ClauseSpec spec = condition_spec();
  spec.sources.schema = true;
  spec.sources.utterance = true;
  Schema schema;
  schema.tables = {{"ASINs", {"price"}}};
  CandidateSet set =
      collect_candidates(spec, schema, "items under 100 dollars", {"size > 20"});

  REQUIRE(set.contains("price < 100"));
  REQUIRE(set.values.at("price < 100").count(Provenance::kGrammar) == 1);
  REQUIRE(set.contains("delivery = fast"));
  REQUIRE(set.contains("size > 20"));
  REQUIRE(set.values.at("size > 20").count(Provenance::kTrainingData) == 1);
  REQUIRE(set.contains("asins"));
  REQUIRE(set.contains("asins . price"));
  REQUIRE(set.contains("items under"));  // utterance bigram
  REQUIRE(set.contains("100"));
  REQUIRE(set.values.at("100").count(Provenance::kUtterance) == 1);
}

TEST_CASE("numeral placeholders expand over utterance numerals only") {
  ClauseSpec spec = condition_spec();
  Schema schema;
  CandidateSet set = collect_candidates(spec, schema, "laptops over 100", {});
  REQUIRE(set.contains("price > 100"));
  REQUIRE(set.contains("price < 100"));
  REQUIRE_FALSE(set.contains("price > 200"));
  REQUIRE_FALSE(set.contains("price > <num>"));
}

TEST_CASE("nullable clauses gain the None value, required ones do not") {
  ClauseSpec spec = condition_spec();
  Schema schema;
  CandidateSet nullable = collect_candidates(spec, schema, "over 5", {});
  REQUIRE(nullable.contains("None"));
  spec.nullable = false;
  CandidateSet required = collect_candidates(spec, schema, "over 5", {});
  REQUIRE_FALSE(required.contains("None"));
}

TEST_CASE("None values from training data are not duplicated as candidates") {
  ClauseSpec spec = condition_spec();
  spec.grammar_terminals = {"delivery = fast"};
  Schema schema;
  CandidateSet set = collect_candidates(spec, schema, "anything", {"none", "None"});
  REQUIRE(set.size() == 2);  // delivery = fast, None
  REQUIRE(set.contains("None"));
}

TEST_CASE("values are case-folded") {
  ClauseSpec spec = condition_spec();
  spec.grammar_terminals = {"Delivery = Fast"};
  spec.sources.training_data = false;
  spec.nullable = false;
  Schema schema;
  CandidateSet set = collect_candidates(spec, schema, "x", {});
  REQUIRE(set.contains("delivery = fast"));
  REQUIRE_FALSE(set.contains("Delivery = Fast"));
}

TEST_CASE("a clause with no candidates at all is a configuration error") {
  ClauseSpec spec;
  spec.id = "empty";
  spec.sources = {.grammar = true};
  Schema schema;
  REQUIRE_THROWS_AS(collect_candidates(spec, schema, "hi", {}), ConfigError);
}

TEST_CASE("placeholder expansion with no numerals drops those terminals") {
  ClauseSpec spec = condition_spec();
  Schema schema;
  CandidateSet set = collect_candidates(spec, schema, "fast shipping please", {});
  REQUIRE(set.contains("delivery = fast"));
  REQUIRE_FALSE(set.contains("price > <num>"));
  for (const auto& [value, p] : set.values) {
    (void)p;
    REQUIRE(value.find("<num>") == std::string::npos);
  }
}

TEST_CASE("fixture files load into candidate sets") {
  std::string path = "candidate_fixture_test.json";
  {
    std::ofstream out(path);
    out << R"({"clause": "condition", "values": ["price > 100", "delivery = fast"],)"
        << R"( "nullable": true})";
  }
  CandidateSet set = load_candidate_fixture(path);
  std::remove(path.c_str());
  REQUIRE(set.clause_id == "condition");
  REQUIRE(set.size() == 3);
  REQUIRE(set.contains("None"));
  REQUIRE_THROWS_AS(load_candidate_fixture("does_not_exist.json"), DataError);
}
