#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqfill/error.hpp"
#include "seqfill/grammar.hpp"
#include "seqfill/vocab.hpp"

namespace seqfill {

enum class Split { kTrain, kDev, kTest };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  throw DataError("unknown split label: " + s);
}

struct Example {
  std::string utterance;
  std::string sql;
  std::string template_id;  // sql with entities anonymized
  std::map<std::string, std::optional<std::string>> clauses;  // gold values
  Split split = Split::kTrain;
};

struct Dataset {
  std::vector<Example> examples;

  std::vector<const Example*> split(Split s) const {
    std::vector<const Example*> out;
    for (const auto& e : examples)
      if (e.split == s) out.push_back(&e);
    return out;
  }
};

// Replaces quoted string literals and standalone numerals with typed
// placeholders; used to derive template ids.
inline std::string anonymize_template(const std::string& sql) {
  std::string out;
  std::size_t i = 0;
  while (i < sql.size()) {
    if (sql[i] == '"') {
      std::size_t close = sql.find('"', i + 1);
      if (close == std::string::npos) {
        out += sql.substr(i);
        break;
      }
      out += "\"STR\"";
      i = close + 1;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(sql[i])) &&
        (i == 0 || !detail::is_word_char(sql[i - 1]))) {
      std::size_t j = i;
      while (j < sql.size() && std::isdigit(static_cast<unsigned char>(sql[j]))) ++j;
      if (j == sql.size() || !detail::is_word_char(sql[j])) {
        out += "NUM";
        i = j;
        continue;
      }
    }
    out.push_back(sql[i]);
    ++i;
  }
  return out;
}

// Whitespace collapsed, SQL keywords case-folded; identifiers and string
// literals stay case-sensitive.
inline std::string normalize_sql(const std::string& sql) {
  static const std::set<std::string> kKeywords = {
      "select", "from", "where", "group", "order", "by", "and", "or",  "not",
      "asc",    "desc", "limit", "in",    "as",    "on", "join", "distinct"};
  std::string out;
  std::istringstream in(sql);
  std::string word;
  bool first = true;
  while (in >> word) {
    std::string lower;
    for (char c : word)
      lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (!first) out.push_back(' ');
    if (kKeywords.count(lower)) {
      for (char& c : lower) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      out += lower;
    } else {
      out += word;
    }
    first = false;
  }
  return out;
}

inline bool exact_match(const std::string& pred_sql, const std::string& gold_sql) {
  return normalize_sql(pred_sql) == normalize_sql(gold_sql);
}

namespace detail {
inline void check_no_leakage(const std::vector<Example>& examples) {
  std::unordered_map<std::string, Split> seen;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& e = examples[i];
    auto it = seen.find(e.template_id);
    if (it == seen.end()) {
      seen.emplace(e.template_id, e.split);
    } else if (it->second != e.split) {
      throw DataError("split leakage: template '" + e.template_id +
                      "' appears in more than one split (example " + std::to_string(i + 1) +
                      ")");
    }
  }
}
}  // namespace detail

inline nlohmann::json example_to_json(const Example& e) {
  nlohmann::json clauses = nlohmann::json::object();
  for (const auto& [id, v] : e.clauses)
    clauses[id] = v.has_value() ? nlohmann::json(*v) : nlohmann::json(nullptr);
  return {{"utterance", e.utterance},
          {"sql", e.sql},
          {"template", e.template_id},
          {"clauses", clauses},
          {"split", split_name(e.split)}};
}

// JSONL with fields utterance/sql/clauses/template/split, one example per
// line. When a scheme is supplied, gold clauses are checked to re-compose
// into the stored sql.
inline Dataset load_dataset(const std::string& path, const Scheme* scheme = nullptr) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset: " + path);
  Dataset ds;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": malformed JSON (" + e.what() +
                      ")");
    }
    Example ex;
    try {
      ex.utterance = j.at("utterance").get<std::string>();
      ex.sql = j.at("sql").get<std::string>();
      ex.split = split_from_string(j.at("split").get<std::string>());
      for (const auto& [id, v] : j.at("clauses").items()) {
        if (v.is_null())
          ex.clauses[id] = std::nullopt;
        else
          ex.clauses[id] = v.get<std::string>();
      }
      ex.template_id = j.contains("template") ? j.at("template").get<std::string>()
                                              : anonymize_template(ex.sql);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": missing field (" + e.what() +
                      ")");
    }
    if (scheme) {
      std::vector<Clause> clauses;
      for (const auto& spec : scheme->clauses) {
        auto it = ex.clauses.find(spec.id);
        if (it == ex.clauses.end() && !spec.nullable)
          throw DataError(path + ":" + std::to_string(lineno) + ": example missing clause " +
                          spec.id);
        std::string value =
            (it != ex.clauses.end() && it->second.has_value()) ? *it->second : "None";
        clauses.push_back(clause_from_canonical(fill_slot(spec.prompt, value), spec));
      }
      std::string recomposed = compose(clauses, *scheme);
      if (!exact_match(recomposed, ex.sql))
        throw DataError(path + ":" + std::to_string(lineno) +
                        ": gold clauses do not compose to sql ('" + recomposed + "' vs '" +
                        ex.sql + "')");
    }
    ds.examples.push_back(std::move(ex));
  }
  detail::check_no_leakage(ds.examples);
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset: " + path);
  for (const auto& e : ds.examples) out << example_to_json(e).dump() << "\n";
}

// Partitions *templates* (never examples) across train/dev/test. Templates
// matching a forced family substring are kept out of train entirely and
// shared between dev and test.
inline Dataset make_compositional_split(std::vector<Example> examples,
                                        const std::array<double, 3>& ratios,
                                        unsigned int seed,
                                        const std::vector<std::string>& forced_families = {}) {
  double ratio_sum = ratios[0] + ratios[1] + ratios[2];
  if (std::fabs(ratio_sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");

  std::vector<std::string> templates;
  std::set<std::string> seen;
  for (auto& e : examples) {
    if (e.template_id.empty()) e.template_id = anonymize_template(e.sql);
    if (seen.insert(e.template_id).second) templates.push_back(e.template_id);
  }

  auto is_forced = [&](const std::string& tmpl) {
    for (const auto& fam : forced_families)
      if (tmpl.find(fam) != std::string::npos) return true;
    return false;
  };

  std::vector<std::string> free_templates, forced_templates;
  for (const auto& t : templates)
    (is_forced(t) ? forced_templates : free_templates).push_back(t);

  if (free_templates.size() < 3 && ratios[0] > 0 && ratios[1] > 0 && ratios[2] > 0)
    throw DataError("too few templates (" + std::to_string(free_templates.size()) +
                    ") for a three-way split");

  std::mt19937 rng(seed);
  std::shuffle(free_templates.begin(), free_templates.end(), rng);
  std::shuffle(forced_templates.begin(), forced_templates.end(), rng);

  std::map<std::string, Split> assignment;
  std::size_t n = free_templates.size();
  std::size_t n_train = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n)));
  std::size_t n_dev = static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n)));
  if (n_train + n_dev > n) n_dev = n - n_train;
  for (std::size_t i = 0; i < n; ++i) {
    Split s = i < n_train ? Split::kTrain : (i < n_train + n_dev ? Split::kDev : Split::kTest);
    assignment[free_templates[i]] = s;
  }
  // Forced families alternate between dev and test, never train.
  for (std::size_t i = 0; i < forced_templates.size(); ++i)
    assignment[forced_templates[i]] = (i % 2 == 0) ? Split::kTest : Split::kDev;

  for (auto& e : examples) e.split = assignment.at(e.template_id);
  Dataset ds{std::move(examples)};
  detail::check_no_leakage(ds.examples);
  return ds;
}

}  // namespace seqfill
