#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "seqfill/dataset.hpp"
#include "seqfill/grammar.hpp"

namespace seqfill {

// Synthetic e-commerce search-query corpus: utterances pair a product phrase
// with an optional price/size/delivery condition. The "price >" family is the
// compositional hold-out; it never reaches the training split.
struct SyntheticEcommerce {
  Dataset dataset;
  std::vector<std::string> generic_corpus;
};

namespace detail {

inline const std::vector<std::string>& synthetic_products() {
  static const std::vector<std::string> kProducts = {
      "petrol trimmer",   "garden shears",   "cordless drill",  "laptop sleeve",
      "running shoes",    "coffee grinder",  "yoga mat",        "desk lamp",
      "water bottle",     "hiking backpack", "wireless mouse",  "kitchen scale",
      "electric kettle",  "phone tripod",    "camping stove",   "beard oil",
      "winter gloves",    "memory card",     "travel adapter",  "reading pillow",
      "noise headphones", "pasta maker",     "bike pump",       "rain jacket",
      "screen protector", "soldering iron",  "dog harness",     "baking tray",
      "storage ottoman",  "air purifier"};
  return kProducts;
}

inline const std::vector<int>& synthetic_numbers() {
  static const std::vector<int> kNumbers = {10, 20, 30, 50, 75, 100, 150, 200, 300, 500};
  return kNumbers;
}

struct SyntheticFamily {
  std::string name;
  // Builds (utterance tail, condition value); empty condition means None.
  std::string utterance_suffix;  // with <num> placeholder
  std::string condition;         // with <num> placeholder
};

inline const std::vector<SyntheticFamily>& synthetic_families() {
  static const std::vector<SyntheticFamily> kFamilies = {
      {"none", "", ""},
      {"price_lt", "under <num> dollar", "price < <num>"},
      {"price_gt", "over <num> dollar", "price > <num>"},
      {"price_gt_delivery", "over <num> dollar with fast delivery",
       "price > <num> and delivery = fast"},
      {"delivery", "with fast delivery", "delivery = fast"},
      {"price_lt_delivery", "under <num> dollar with fast delivery",
       "price < <num> and delivery = fast"},
      {"size_gt", "over <num> gb", "size > <num> gb"},
      {"size_gt_delivery", "over <num> gb with fast delivery",
       "size > <num> gb and delivery = fast"},
  };
  return kFamilies;
}

inline std::string replace_num(std::string s, int n) {
  const std::string marker = "<num>";
  std::string num = std::to_string(n);
  std::size_t pos;
  while ((pos = s.find(marker)) != std::string::npos) s.replace(pos, marker.size(), num);
  return s;
}

}  // namespace detail

// Grammar terminals for the synthetic condition clause; <num> expands over
// utterance numerals at candidate-collection time.
inline std::vector<std::string> synthetic_condition_terminals() {
  return {"price < <num>",
          "price > <num>",
          "price = <num>",
          "size > <num> gb",
          "size = <num> gb",
          "delivery = fast",
          "price < <num> and delivery = fast",
          "price > <num> and delivery = fast",
          "size > <num> gb and delivery = fast"};
}

inline Scheme synthetic_ecommerce_scheme() {
  Scheme s = ecommerce_scheme();
  for (auto& clause : s.clauses)
    if (clause.id == "condition") clause.grammar_terminals = synthetic_condition_terminals();
  return s;
}

inline SyntheticEcommerce make_synthetic_ecommerce(unsigned int seed = 1,
                                                   int examples_per_family = 50) {
  const Scheme scheme = synthetic_ecommerce_scheme();
  const auto& products = detail::synthetic_products();
  const auto& numbers = detail::synthetic_numbers();

  std::mt19937 rng(seed);
  std::vector<Example> examples;
  for (const auto& family : detail::synthetic_families()) {
    // Hold-out families are smaller so the dev/test splits stay modest.
    bool held_out = family.name.rfind("price_gt", 0) == 0;
    int count = held_out ? examples_per_family / 2 : examples_per_family;
    for (int i = 0; i < count; ++i) {
      const std::string& product = products[rng() % products.size()];
      int number = numbers[rng() % numbers.size()];

      Example ex;
      ex.utterance = product;
      if (!family.utterance_suffix.empty())
        ex.utterance += " " + detail::replace_num(family.utterance_suffix, number);
      ex.clauses["matching"] = product;
      if (family.condition.empty())
        ex.clauses["condition"] = std::nullopt;
      else
        ex.clauses["condition"] = detail::replace_num(family.condition, number);

      std::vector<Clause> clauses;
      for (const auto& spec : scheme.clauses) {
        std::string value = ex.clauses.at(spec.id).value_or("None");
        clauses.push_back(clause_from_canonical(fill_slot(spec.prompt, value), spec));
      }
      ex.sql = compose(clauses, scheme);
      ex.template_id = "ecommerce/" + family.name;
      examples.push_back(std::move(ex));
    }
  }

  SyntheticEcommerce out;
  out.dataset = make_compositional_split(std::move(examples), {0.67, 0.165, 0.165}, seed,
                                         {"price_gt"});

  // Generic corpus: product-catalog lines plus price/size phrasing lines
  // covering both comparison directions, mirroring pretraining text a large
  // LM would have seen.
  for (const auto& product : products)
    out.generic_corpus.push_back("matching algorithm ( " + product);
  for (int n : numbers) {
    out.generic_corpus.push_back("under " + std::to_string(n) +
                                 " dollar the condition is : price < " + std::to_string(n));
    out.generic_corpus.push_back("over " + std::to_string(n) +
                                 " dollar the condition is : price > " + std::to_string(n));
    out.generic_corpus.push_back("over " + std::to_string(n) +
                                 " gb the condition is : size > " + std::to_string(n) + " gb");
    out.generic_corpus.push_back("exactly " + std::to_string(n) +
                                 " gb the condition is : size = " + std::to_string(n) + " gb");
    out.generic_corpus.push_back("under " + std::to_string(n) +
                                 " dollar with fast delivery the condition is : price < " +
                                 std::to_string(n) + " and delivery = fast");
    out.generic_corpus.push_back("over " + std::to_string(n) +
                                 " dollar with fast delivery the condition is : price > " +
                                 std::to_string(n) + " and delivery = fast");
    out.generic_corpus.push_back("over " + std::to_string(n) +
                                 " gb with fast delivery the condition is : size > " +
                                 std::to_string(n) + " gb and delivery = fast");
  }
  out.generic_corpus.push_back("with fast delivery the condition is : delivery = fast");
  for (int i = 0; i < 6; ++i)
    out.generic_corpus.push_back("the condition is : none");
  return out;
}

}  // namespace seqfill
