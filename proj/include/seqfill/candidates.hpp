#pragma once

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqfill/error.hpp"
#include "seqfill/grammar.hpp"
#include "seqfill/vocab.hpp"

namespace seqfill {

enum class Provenance { kGrammar, kSchema, kUtterance, kTrainingData };

inline const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kGrammar: return "grammar";
    case Provenance::kSchema: return "schema";
    case Provenance::kUtterance: return "utterance";
    case Provenance::kTrainingData: return "training-data";
  }
  return "?";
}

// Candidate values for one clause, each tagged with where it came from.
struct CandidateSet {
  std::string clause_id;
  std::map<std::string, std::set<Provenance>> values;

  void add(const std::string& value, Provenance p) {
    if (!value.empty()) values[value].insert(p);
  }
  bool empty() const { return values.empty(); }
  std::size_t size() const { return values.size(); }
  bool contains(const std::string& v) const { return values.count(v) > 0; }
};

namespace detail {

// Contiguous word n-grams up to max_len, plus standalone numerals.
inline std::vector<std::string> utterance_ngrams(const std::string& utterance, int max_len) {
  std::vector<std::string> words = split_words(utterance);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    std::string ng;
    for (std::size_t len = 1; len <= static_cast<std::size_t>(max_len) && i + len <= words.size();
         ++len) {
      if (len > 1) ng += " ";
      ng += words[i + len - 1];
      out.push_back(ng);
    }
  }
  return out;
}

inline std::vector<std::string> utterance_numerals(const std::string& utterance) {
  std::vector<std::string> out;
  for (const auto& w : split_words(utterance))
    if (is_numeral(w)) out.push_back(w);
  return out;
}

// Expands "<num>" over utterance numerals and "<ng>" over utterance n-grams.
inline std::vector<std::string> expand_terminal(const std::string& terminal,
                                                const std::string& utterance, int ngram_max) {
  auto expand_one = [](const std::vector<std::string>& base, const std::string& marker,
                       const std::vector<std::string>& fills) {
    std::vector<std::string> out;
    for (const auto& t : base) {
      auto pos = t.find(marker);
      if (pos == std::string::npos) {
        out.push_back(t);
        continue;
      }
      for (const auto& f : fills)
        out.push_back(t.substr(0, pos) + f + t.substr(pos + marker.size()));
    }
    return out;
  };
  std::vector<std::string> result{terminal};
  while (true) {
    bool has_num = false, has_ng = false;
    for (const auto& t : result) {
      has_num = has_num || t.find("<num>") != std::string::npos;
      has_ng = has_ng || t.find("<ng>") != std::string::npos;
    }
    if (!has_num && !has_ng) break;
    if (has_num) result = expand_one(result, "<num>", utterance_numerals(utterance));
    if (has_ng) result = expand_one(result, "<ng>", utterance_ngrams(utterance, ngram_max));
    if (result.empty()) break;
  }
  return result;
}

}  // namespace detail

// Union of the four candidate sources declared by the clause spec. Values are
// case-folded to match the tokenizer; "None" is included iff the clause is
// nullable.
inline CandidateSet collect_candidates(const ClauseSpec& spec, const Schema& schema,
                                       const std::string& utterance,
                                       const std::vector<std::string>& training_values,
                                       int ngram_max = 4) {
  CandidateSet set;
  set.clause_id = spec.id;
  auto fold = [](const std::string& s) {
    std::string out;
    for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
  };
  if (spec.sources.grammar) {
    for (const auto& terminal : spec.grammar_terminals)
      for (const auto& v : detail::expand_terminal(terminal, utterance, ngram_max))
        set.add(fold(v), Provenance::kGrammar);
  }
  if (spec.sources.schema) {
    for (const auto& [table, columns] : schema.tables) {
      set.add(fold(table), Provenance::kSchema);
      if (spec.rule != ClauseRule::kFrom)
        for (const auto& col : columns)
          set.add(fold(table) + " . " + fold(col), Provenance::kSchema);
    }
  }
  if (spec.sources.utterance) {
    for (const auto& ng : detail::utterance_ngrams(utterance, ngram_max))
      set.add(ng, Provenance::kUtterance);
    for (const auto& num : detail::utterance_numerals(utterance))
      set.add(num, Provenance::kUtterance);
  }
  if (spec.sources.training_data) {
    for (const auto& v : training_values)
      if (!detail::is_none_value(v)) set.add(fold(v), Provenance::kTrainingData);
  }
  if (spec.nullable) set.add("None", Provenance::kGrammar);
  if (set.empty())
    throw ConfigError("no candidate values for clause " + spec.id +
                      " (all sources empty)");
  return set;
}

// Fixture format: {"clause": id, "values": [...], "nullable": bool}
inline CandidateSet load_candidate_fixture(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open candidate fixture: " + path);
  nlohmann::json j;
  in >> j;
  CandidateSet set;
  set.clause_id = j.at("clause").get<std::string>();
  for (const auto& v : j.at("values")) set.add(v.get<std::string>(), Provenance::kGrammar);
  if (j.value("nullable", false)) set.add("None", Provenance::kGrammar);
  return set;
}

}  // namespace seqfill
