#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqfill/error.hpp"

namespace seqfill {

// Per-clause natural-language prefix whose suffix slot a model fills.
struct PromptTemplate {
  std::string clause_id;
  std::string text;
};

enum class ClauseRule {
  kFrom,
  kSelect,
  kWhere,
  kGroupBy,
  kOrderBy,
  kMatching,
  kCondition,
  kVerbatim,
};

enum class DependencyMode { kSequential, kIndependent };

struct CandidateSources {
  bool grammar = false;
  bool schema = false;
  bool utterance = false;
  bool training_data = false;
};

struct ClauseSpec {
  std::string id;
  int ordinal = 0;  // position in generation order, 1-based
  PromptTemplate prompt;
  bool nullable = false;
  ClauseRule rule = ClauseRule::kVerbatim;
  DependencyMode dependency = DependencyMode::kSequential;
  CandidateSources sources;
  // Fixed grammar terminals; "<num>" expands over utterance numerals and
  // "<ng>" over utterance n-grams at candidate-collection time.
  std::vector<std::string> grammar_terminals;
};

struct CanonicalUtterance {
  std::string clause_id;
  std::string text;
};

struct Clause {
  std::string id;
  std::optional<std::string> sql;  // null iff the filled value was "None"
};

// Table/column description backing the schema candidate source.
struct Schema {
  std::map<std::string, std::vector<std::string>> tables;

  static Schema from_json(const nlohmann::json& j) {
    Schema s;
    for (const auto& [name, cols] : j.at("tables").items())
      s.tables[name] = cols.get<std::vector<std::string>>();
    return s;
  }
};

enum class SchemeKind { kGeoQuery, kEcommerce, kWholeQuery };

struct Scheme {
  SchemeKind kind = SchemeKind::kGeoQuery;
  std::string name;
  std::vector<ClauseSpec> clauses;  // stored in generation order

  const ClauseSpec& clause(const std::string& id) const {
    for (const auto& c : clauses)
      if (c.id == id) return c;
    throw ConfigError("unknown clause id: " + id);
  }
};

inline CanonicalUtterance fill_slot(const PromptTemplate& tmpl, const std::string& value) {
  return {tmpl.clause_id, tmpl.text + " " + value};
}

// Recovers (prompt, value) from a canonical utterance built by fill_slot.
inline std::string extract_value(const CanonicalUtterance& c, const PromptTemplate& tmpl) {
  const std::string prefix = tmpl.text + " ";
  if (c.text.rfind(prefix, 0) != 0)
    throw GrammarError("canonical utterance does not start with prompt of clause " +
                       tmpl.clause_id);
  return c.text.substr(prefix.size());
}

namespace detail {
inline bool is_none_value(const std::string& v) {
  if (v.size() != 4) return false;
  std::string lower;
  for (char c : v) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return lower == "none";
}

inline void check_value_grammar(const std::string& value, const ClauseSpec& spec) {
  if (std::count(value.begin(), value.end(), '"') % 2 != 0)
    throw GrammarError("unbalanced quotes in value for clause " + spec.id + ": " + value);
  if (spec.rule == ClauseRule::kMatching && value.find('"') != std::string::npos)
    throw GrammarError("matching value may not contain quotes: " + value);
}
}  // namespace detail

inline Clause clause_from_canonical(const CanonicalUtterance& c, const ClauseSpec& spec) {
  if (c.clause_id != spec.id)
    throw GrammarError("canonical utterance for clause " + c.clause_id +
                       " handed to spec of clause " + spec.id);
  std::string value = extract_value(c, spec.prompt);
  if (detail::is_none_value(value)) return {spec.id, std::nullopt};
  detail::check_value_grammar(value, spec);
  switch (spec.rule) {
    case ClauseRule::kFrom:
      return {spec.id, "FROM " + value};
    case ClauseRule::kSelect:
      return {spec.id, "SELECT " + value};
    case ClauseRule::kWhere:
      return {spec.id, "WHERE " + value};
    case ClauseRule::kGroupBy:
      return {spec.id, "GROUP BY " + value};
    case ClauseRule::kOrderBy:
      return {spec.id, "ORDER BY " + value};
    case ClauseRule::kMatching:
      // Spelling kept exactly as in the datasets this mirrors.
      return {spec.id, "Maching Algorithm(\"" + value + "\") == True"};
    case ClauseRule::kCondition:
    case ClauseRule::kVerbatim:
      return {spec.id, value};
  }
  throw GrammarError("unhandled clause rule");
}

namespace detail {
inline std::string squeeze_spaces(const std::string& s) {
  std::string out;
  bool prev_space = true;
  for (char c : s) {
    if (c == ' ') {
      if (!prev_space) out.push_back(' ');
      prev_space = true;
    } else {
      out.push_back(c);
      prev_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

inline int compose_rank(ClauseRule rule) {
  switch (rule) {
    case ClauseRule::kSelect: return 0;
    case ClauseRule::kFrom: return 1;
    case ClauseRule::kWhere: return 2;
    case ClauseRule::kGroupBy: return 3;
    case ClauseRule::kOrderBy: return 4;
    case ClauseRule::kMatching: return 0;
    case ClauseRule::kCondition: return 1;
    case ClauseRule::kVerbatim: return 0;
  }
  return 0;
}
}  // namespace detail

// Composes clauses into the final SQL string. Input order is irrelevant;
// clauses are re-sorted into canonical SQL order. Null clauses are omitted.
inline std::string compose(std::vector<Clause> clauses, const Scheme& scheme) {
  if (clauses.size() != scheme.clauses.size())
    throw CompositionError("expected " + std::to_string(scheme.clauses.size()) +
                           " clauses, got " + std::to_string(clauses.size()));
  std::map<std::string, const Clause*> by_id;
  for (const auto& c : clauses) {
    if (!by_id.emplace(c.id, &c).second)
      throw CompositionError("duplicate clause " + c.id);
  }
  std::vector<std::pair<int, const Clause*>> ordered;
  for (const auto& spec : scheme.clauses) {
    auto it = by_id.find(spec.id);
    if (it == by_id.end()) throw CompositionError("missing clause " + spec.id);
    if (!it->second->sql.has_value()) {
      bool required = spec.rule == ClauseRule::kSelect || spec.rule == ClauseRule::kFrom ||
                      spec.rule == ClauseRule::kMatching || spec.rule == ClauseRule::kVerbatim;
      if (required)
        throw CompositionError("required clause " + spec.id + " is null");
      continue;
    }
    ordered.emplace_back(detail::compose_rank(spec.rule), it->second);
  }
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  std::string sql;
  if (scheme.kind == SchemeKind::kEcommerce) {
    sql = "SELECT * FROM ASINs WHERE ";
    for (std::size_t i = 0; i < ordered.size(); ++i) {
      if (i > 0) sql += " and ";
      sql += *ordered[i].second->sql;
    }
  } else {
    for (std::size_t i = 0; i < ordered.size(); ++i) {
      if (i > 0) sql += " ";
      sql += *ordered[i].second->sql;
    }
  }
  return detail::squeeze_spaces(sql);
}

// --- built-in schemes -------------------------------------------------------

inline Scheme geoquery_scheme() {
  Scheme s;
  s.kind = SchemeKind::kGeoQuery;
  s.name = "geoquery";
  auto make = [](std::string id, int ordinal, std::string prompt, bool nullable,
                 ClauseRule rule, CandidateSources src) {
    ClauseSpec c;
    c.id = id;
    c.ordinal = ordinal;
    c.prompt = {id, std::move(prompt)};
    c.nullable = nullable;
    c.rule = rule;
    c.dependency = DependencyMode::kSequential;
    c.sources = src;
    return c;
  };
  s.clauses.push_back(make("from", 1, "the sentence talks about", false, ClauseRule::kFrom,
                           {.schema = true}));
  s.clauses.push_back(make("select", 2, "the sentence talks about", false, ClauseRule::kSelect,
                           {.schema = true, .training_data = true}));
  s.clauses.push_back(make("where", 3, "the sentence requires", true, ClauseRule::kWhere,
                           {.grammar = true, .training_data = true}));
  s.clauses.push_back(make("group_by", 4, "the sentence requires to group by", true,
                           ClauseRule::kGroupBy, {.schema = true, .training_data = true}));
  s.clauses.push_back(make("order_by", 5, "the sentence requires the result to be ordered by",
                           true, ClauseRule::kOrderBy,
                           {.schema = true, .training_data = true}));
  return s;
}

inline Scheme ecommerce_scheme() {
  Scheme s;
  s.kind = SchemeKind::kEcommerce;
  s.name = "ecommerce";
  ClauseSpec matching;
  matching.id = "matching";
  matching.ordinal = 1;
  matching.prompt = {"matching", "matching algorithm ("};
  matching.nullable = false;
  matching.rule = ClauseRule::kMatching;
  matching.dependency = DependencyMode::kIndependent;
  matching.sources = {.utterance = true};
  s.clauses.push_back(matching);

  ClauseSpec condition;
  condition.id = "condition";
  condition.ordinal = 2;
  condition.prompt = {"condition", "the condition is :"};
  condition.nullable = true;
  condition.rule = ClauseRule::kCondition;
  condition.dependency = DependencyMode::kIndependent;
  condition.sources = {.grammar = true, .training_data = true};
  s.clauses.push_back(condition);
  return s;
}

// Single whole-query clause used by the sequential-decomposition ablation.
inline Scheme whole_query_scheme(const std::string& prompt = "the sql is") {
  Scheme s;
  s.kind = SchemeKind::kWholeQuery;
  s.name = "whole_query";
  ClauseSpec q;
  q.id = "query";
  q.ordinal = 1;
  q.prompt = {"query", prompt};
  q.nullable = false;
  q.rule = ClauseRule::kVerbatim;
  q.dependency = DependencyMode::kIndependent;
  q.sources = {.training_data = true};
  s.clauses.push_back(q);
  return s;
}

// --- scheme (de)serialization ----------------------------------------------

inline ClauseRule clause_rule_from_string(const std::string& s) {
  if (s == "from") return ClauseRule::kFrom;
  if (s == "select") return ClauseRule::kSelect;
  if (s == "where") return ClauseRule::kWhere;
  if (s == "group_by") return ClauseRule::kGroupBy;
  if (s == "order_by") return ClauseRule::kOrderBy;
  if (s == "matching") return ClauseRule::kMatching;
  if (s == "condition") return ClauseRule::kCondition;
  if (s == "verbatim") return ClauseRule::kVerbatim;
  throw ConfigError("unknown clause rule: " + s);
}

inline Scheme scheme_from_json(const nlohmann::json& j) {
  Scheme s;
  s.name = j.at("name").get<std::string>();
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "geoquery") s.kind = SchemeKind::kGeoQuery;
  else if (kind == "ecommerce") s.kind = SchemeKind::kEcommerce;
  else if (kind == "whole_query") s.kind = SchemeKind::kWholeQuery;
  else throw ConfigError("unknown scheme kind: " + kind);

  for (const auto& cj : j.at("clauses")) {
    ClauseSpec c;
    c.id = cj.at("id").get<std::string>();
    c.ordinal = cj.at("ordinal").get<int>();
    c.prompt = {c.id, cj.at("prompt").get<std::string>()};
    c.nullable = cj.value("nullable", false);
    c.rule = clause_rule_from_string(cj.at("rule").get<std::string>());
    c.dependency = cj.value("dependency", std::string("sequential")) == "independent"
                       ? DependencyMode::kIndependent
                       : DependencyMode::kSequential;
    if (cj.contains("sources")) {
      const auto& sj = cj["sources"];
      c.sources.grammar = sj.value("grammar", false);
      c.sources.schema = sj.value("schema", false);
      c.sources.utterance = sj.value("utterance", false);
      c.sources.training_data = sj.value("training_data", false);
    }
    if (cj.contains("grammar_terminals"))
      c.grammar_terminals = cj.at("grammar_terminals").get<std::vector<std::string>>();
    s.clauses.push_back(c);
  }
  std::sort(s.clauses.begin(), s.clauses.end(),
            [](const ClauseSpec& a, const ClauseSpec& b) { return a.ordinal < b.ordinal; });
  std::vector<int> ords;
  for (const auto& c : s.clauses) ords.push_back(c.ordinal);
  for (std::size_t i = 0; i < ords.size(); ++i)
    if (ords[i] != static_cast<int>(i) + 1)
      throw ConfigError("clause ordinals must be a permutation of 1..n");
  return s;
}

}  // namespace seqfill
