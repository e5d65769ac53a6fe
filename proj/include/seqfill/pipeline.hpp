#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqfill/candidates.hpp"
#include "seqfill/dataset.hpp"
#include "seqfill/decode.hpp"
#include "seqfill/distribution.hpp"
#include "seqfill/error.hpp"
#include "seqfill/grammar.hpp"
#include "seqfill/ngram.hpp"
#include "seqfill/trie.hpp"
#include "seqfill/vocab.hpp"

namespace seqfill {

// Whether previously generated clauses enter later contexts as SQL clause
// text or as canonical utterances.
enum class ContextStyle { kSqlClause, kCanonical };

struct AblationFlags {
  bool seq_off = false;   // collapse to a single whole-query clause
  bool zero_off = false;  // force gamma = 1 on every clause
};

struct PipelineConfig {
  Scheme scheme;
  Schema schema;
  std::map<std::string, EnsembleConfig> per_clause;  // keyed by clause id
  EnsembleConfig defaults;
  AblationFlags ablation;
  ContextStyle context_style = ContextStyle::kSqlClause;
  int copy_ngram_max = 4;
  std::string whole_query_prompt = "the sql is";
  EnsembleConfig whole_query_ensemble;

  EnsembleConfig clause_config(const std::string& clause_id, bool zero_off) const {
    EnsembleConfig cfg = defaults;
    auto it = per_clause.find(clause_id);
    if (it != per_clause.end()) cfg = it->second;
    if (zero_off) cfg.gamma = 1.0;
    cfg.validate();
    return cfg;
  }
};

struct TrainingRecord {
  std::string clause_id;
  std::vector<TokenId> context;  // utterance, gold previous clauses, prompt
  std::vector<TokenId> target;   // value tokens ("None" for absent clauses)
};

struct ClauseTrace {
  std::string clause_id;
  std::string prompt;
  std::vector<TokenId> context;
  std::string value;
  CanonicalUtterance canonical;
  Clause clause;
  bool off_trie = false;
  bool degenerate_rescale = false;
  std::vector<StepRecord> steps;
};

struct ParseTrace {
  std::string utterance;
  std::string sql;
  std::vector<ClauseTrace> clauses;  // generation order
  bool ok = true;
  std::string error;

  nlohmann::json to_json(bool include_steps = false) const {
    nlohmann::json cj = nlohmann::json::array();
    for (const auto& c : clauses) {
      nlohmann::json entry = {
          {"clause", c.clause_id},
          {"prompt", c.prompt},
          {"value", c.value},
          {"canonical", c.canonical.text},
          {"sql", c.clause.sql.has_value() ? nlohmann::json(*c.clause.sql)
                                           : nlohmann::json(nullptr)},
          {"off_trie", c.off_trie},
          {"degenerate_rescale", c.degenerate_rescale},
      };
      if (include_steps) {
        nlohmann::json steps = nlohmann::json::array();
        for (const auto& s : c.steps)
          steps.push_back({{"index", s.index}, {"chosen", s.chosen}, {"off_trie", s.off_trie}});
        entry["steps"] = steps;
      }
      cj.push_back(entry);
    }
    return {{"utterance", utterance}, {"sql", sql}, {"ok", ok},
            {"error", error},         {"clauses", cj}};
  }
};

struct EvalReport {
  int total = 0;
  double exact_match_accuracy = 0.0;
  // Cascading: clauses 1..i all correct, in generation order.
  std::map<std::string, double> per_clause_cascading;
  // Individual: clause i correct on its own.
  std::map<std::string, double> per_clause_individual;
  std::map<std::string, int> error_counts;

  nlohmann::json to_json() const {
    return {{"total", total},
            {"exact_match", exact_match_accuracy},
            {"per_clause_cascading", per_clause_cascading},
            {"per_clause_individual", per_clause_individual},
            {"error_counts", error_counts}};
  }
};

inline std::vector<std::string> load_corpus_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

namespace detail {
inline std::string clause_value_or_none(const Example& ex, const std::string& clause_id) {
  auto it = ex.clauses.find(clause_id);
  if (it == ex.clauses.end() || !it->second.has_value()) return "None";
  return *it->second;
}

inline std::string normalize_value(const std::string& v) {
  std::string folded;
  for (char c : v)
    folded.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  std::istringstream in(folded);
  std::string word, out;
  while (in >> word) {
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

inline bool values_equal(const std::string& a, const std::string& b) {
  return normalize_value(a) == normalize_value(b);
}
}  // namespace detail

// One record per (example, clause); contexts use gold previous clauses
// (teacher forcing), never predicted ones.
inline std::vector<TrainingRecord> prepare_training_records(
    const std::vector<const Example*>& examples, const Scheme& scheme, const Vocabulary& vocab,
    ContextStyle style = ContextStyle::kSqlClause) {
  std::vector<TrainingRecord> records;
  for (const Example* ex : examples) {
    std::vector<TokenId> running;  // gold previous clause text, sequential mode
    for (const auto& spec : scheme.clauses) {
      auto it = ex->clauses.find(spec.id);
      bool present = it != ex->clauses.end() && it->second.has_value();
      if (!present && !spec.nullable && scheme.kind != SchemeKind::kWholeQuery)
        throw DataError("example '" + ex->utterance + "' missing required clause " + spec.id);
      std::string value = present ? *it->second : "None";

      TrainingRecord rec;
      rec.clause_id = spec.id;
      rec.context = tokenize(ex->utterance, vocab);
      if (spec.dependency == DependencyMode::kSequential) {
        rec.context.insert(rec.context.end(), running.begin(), running.end());
      }
      std::vector<TokenId> prompt_toks = tokenize(spec.prompt.text, vocab);
      rec.context.insert(rec.context.end(), prompt_toks.begin(), prompt_toks.end());
      rec.target = tokenize(value, vocab);
      records.push_back(std::move(rec));

      if (spec.dependency == DependencyMode::kSequential) {
        std::string gold_text;
        if (style == ContextStyle::kCanonical) {
          gold_text = fill_slot(spec.prompt, value).text;
        } else if (present) {
          Clause m = clause_from_canonical(fill_slot(spec.prompt, value), spec);
          if (m.sql.has_value()) gold_text = *m.sql;
        }
        if (!gold_text.empty()) {
          std::vector<TokenId> toks = tokenize(gold_text, vocab);
          running.insert(running.end(), toks.begin(), toks.end());
        }
      }
    }
  }
  return records;
}

// Training record for the whole-query ablation: one record per example.
inline std::vector<TrainingRecord> prepare_whole_query_records(
    const std::vector<const Example*>& examples, const std::string& prompt,
    const Vocabulary& vocab) {
  std::vector<TrainingRecord> records;
  for (const Example* ex : examples) {
    TrainingRecord rec;
    rec.clause_id = "query";
    rec.context = tokenize(ex->utterance, vocab);
    std::vector<TokenId> prompt_toks = tokenize(prompt, vocab);
    rec.context.insert(rec.context.end(), prompt_toks.begin(), prompt_toks.end());
    rec.target = tokenize(ex->sql, vocab);
    records.push_back(std::move(rec));
  }
  return records;
}

struct ModelSettings {
  int few_order = 3;
  std::optional<NgramSmoothing> few_smoothing;
  int zero_order = 9;
  std::optional<NgramSmoothing> zero_smoothing;
};

// Everything one run needs: the shared vocabulary, the trained models, the
// training-data candidate values, and the configuration.
class Engine {
 public:
  Engine(PipelineConfig config, Dataset dataset, std::vector<std::string> corpus_lines,
         ModelSettings settings = {})
      : config_(std::move(config)), dataset_(std::move(dataset)) {
    build_vocab(corpus_lines);
    collect_training_values();
    train_models(corpus_lines, settings);
  }

  const Vocabulary& vocab() const { return vocab_; }
  const PipelineConfig& config() const { return config_; }
  PipelineConfig& config() { return config_; }
  const Dataset& dataset() const { return dataset_; }
  const LmScorer& zero_model() const { return *zero_model_; }
  const LmScorer& few_model(const std::string& clause_id) const {
    auto it = few_models_.find(clause_id);
    if (it == few_models_.end()) throw ConfigError("no few-shot model for clause " + clause_id);
    return *it->second;
  }

  ParseTrace parse_utterance(const std::string& utterance) const {
    return parse_utterance(utterance, config_.ablation);
  }

  ParseTrace parse_utterance(const std::string& utterance, const AblationFlags& flags) const {
    if (flags.seq_off) return parse_whole_query(utterance, flags);
    ParseTrace trace;
    trace.utterance = utterance;
    std::vector<TokenId> running;
    std::vector<Clause> clauses;
    try {
      for (const auto& spec : config_.scheme.clauses) {
        ClauseTrace ct = decode_clause(spec, utterance, running, flags,
                                       config_.clause_config(spec.id, flags.zero_off),
                                       &few_model(spec.id));
        clauses.push_back(ct.clause);
        if (spec.dependency == DependencyMode::kSequential) append_clause_context(ct, running);
        trace.clauses.push_back(std::move(ct));
      }
      trace.sql = compose(clauses, config_.scheme);
    } catch (const Error& e) {
      trace.ok = false;
      trace.error = e.what();
    }
    return trace;
  }

  // Per-clause gamma grid search on the dev split, teacher-forced contexts.
  // Ties break toward larger gamma.
  std::map<std::string, double> grid_search_gamma(double step = 0.05) const {
    if (step <= 0.0 || std::fabs(std::llround(1.0 / step) * step - 1.0) > 1e-9)
      throw ConfigError("grid step must divide 1 evenly");
    auto dev = dataset_.split(Split::kDev);
    if (dev.empty()) throw ConfigError("gamma grid search needs a non-empty dev split");

    long n_points = std::llround(1.0 / step);
    std::map<std::string, double> best;
    for (const auto& spec : config_.scheme.clauses) {
      double best_gamma = 1.0;
      int best_correct = -1;
      for (long gi = 0; gi <= n_points; ++gi) {
        double gamma = std::min(1.0, static_cast<double>(gi) * step);
        int correct = 0;
        for (const Example* ex : dev) {
          if (clause_prediction_correct(spec, *ex, gamma)) ++correct;
        }
        if (correct >= best_correct) {  // >= prefers larger gamma on ties
          best_correct = correct;
          best_gamma = gamma;
        }
      }
      best[spec.id] = best_gamma;
    }
    return best;
  }

  void apply_gammas(const std::map<std::string, double>& gammas) {
    for (const auto& [clause, gamma] : gammas) {
      EnsembleConfig cfg = config_.clause_config(clause, false);
      cfg.gamma = gamma;
      config_.per_clause[clause] = cfg;
    }
  }

  EvalReport evaluate(Split split) const { return evaluate(split, config_.ablation); }

  EvalReport evaluate(Split split, const AblationFlags& flags) const {
    auto examples = dataset_.split(split);
    EvalReport report;
    report.total = static_cast<int>(examples.size());
    if (examples.empty()) return report;

    std::vector<std::string> order;
    if (flags.seq_off) {
      order = {"query"};
    } else {
      for (const auto& spec : config_.scheme.clauses) order.push_back(spec.id);
    }
    std::map<std::string, int> cascade_correct, individual_correct;
    int em = 0;
    for (const Example* ex : examples) {
      ParseTrace trace = parse_utterance(ex->utterance, flags);
      bool matched = trace.ok && exact_match(trace.sql, ex->sql);
      if (matched) ++em;

      bool cascade = true;
      for (const auto& id : order) {
        bool correct;
        if (flags.seq_off) {
          correct = matched;
        } else {
          const ClauseTrace* ct = nullptr;
          for (const auto& c : trace.clauses)
            if (c.clause_id == id) ct = &c;
          std::string gold = detail::clause_value_or_none(*ex, id);
          correct = trace.ok && ct != nullptr && detail::values_equal(ct->value, gold);
          if (!correct && id == "from")
            report.error_counts["from_table_mismatch"] += 1;
          if (!correct) report.error_counts["clause_" + id + "_mismatch"] += 1;
        }
        if (correct) individual_correct[id] += 1;
        cascade = cascade && correct;
        if (cascade) cascade_correct[id] += 1;
      }
      if (!trace.ok) report.error_counts["parse_failures"] += 1;
    }
    double denom = static_cast<double>(report.total);
    report.exact_match_accuracy = static_cast<double>(em) / denom;
    for (const auto& id : order) {
      report.per_clause_cascading[id] = static_cast<double>(cascade_correct[id]) / denom;
      report.per_clause_individual[id] = static_cast<double>(individual_correct[id]) / denom;
    }
    return report;
  }

  // Rows: full ensembled sequential run, whole-query decoding (-Seq), and
  // few-shot-only sequential decoding (-Zero).
  std::map<std::string, EvalReport> run_ablations(Split split) const {
    std::map<std::string, EvalReport> rows;
    rows["full"] = evaluate(split, AblationFlags{});
    rows["-seq"] = evaluate(split, AblationFlags{.seq_off = true});
    rows["-zero"] = evaluate(split, AblationFlags{.zero_off = true});
    return rows;
  }

  const std::vector<std::string>& training_values(const std::string& clause_id) const {
    static const std::vector<std::string> kEmpty;
    auto it = training_values_.find(clause_id);
    return it == training_values_.end() ? kEmpty : it->second;
  }

 private:
  void build_vocab(const std::vector<std::string>& corpus_lines) {
    auto add_text = [&](const std::string& text) {
      for (const auto& w : split_words(text)) vocab_.add(w);
    };
    for (const auto& line : corpus_lines) add_text(line);
    for (const auto& ex : dataset_.examples) {
      add_text(ex.utterance);
      add_text(ex.sql);
      for (const auto& [id, v] : ex.clauses)
        if (v.has_value()) add_text(*v);
    }
    for (const auto& spec : config_.scheme.clauses) {
      add_text(spec.prompt.text);
      for (const auto& t : spec.grammar_terminals) add_text(t);
    }
    add_text(config_.whole_query_prompt);
    for (const auto& [table, columns] : config_.schema.tables) {
      add_text(table);
      for (const auto& c : columns) add_text(c);
    }
    add_text("None");
  }

  void collect_training_values() {
    auto train = dataset_.split(Split::kTrain);
    for (const auto& spec : config_.scheme.clauses) {
      std::set<std::string> distinct;
      for (const Example* ex : train) {
        auto it = ex->clauses.find(spec.id);
        if (it != ex->clauses.end() && it->second.has_value()) distinct.insert(*it->second);
      }
      training_values_[spec.id].assign(distinct.begin(), distinct.end());
    }
    std::set<std::string> sqls;
    for (const Example* ex : train) sqls.insert(ex->sql);
    training_values_["query"].assign(sqls.begin(), sqls.end());
  }

  void train_models(const std::vector<std::string>& corpus_lines, const ModelSettings& s) {
    NgramSmoothing zero_sm = s.zero_smoothing.value_or(NgramSmoothing::defaults(s.zero_order));
    NgramSmoothing few_sm = s.few_smoothing.value_or(NgramSmoothing::defaults(s.few_order));

    std::vector<std::vector<TokenId>> zero_corpus;
    for (const auto& line : corpus_lines) {
      std::vector<TokenId> seq = tokenize(line, vocab_);
      seq.push_back(vocab_.eov());  // lines end where a decoded value would
      zero_corpus.push_back(std::move(seq));
    }
    if (zero_corpus.empty())
      throw ConfigError("zero-shot model needs a non-empty generic corpus");
    zero_model_ =
        std::make_shared<NgramModel>(train_ngram(zero_corpus, s.zero_order, zero_sm, &vocab_));

    auto train = dataset_.split(Split::kTrain);
    if (train.empty()) throw ConfigError("training split is empty");
    auto records =
        prepare_training_records(train, config_.scheme, vocab_, config_.context_style);
    std::map<std::string, std::vector<std::vector<TokenId>>> per_clause;
    for (const auto& rec : records) {
      std::vector<TokenId> seq = rec.context;
      seq.insert(seq.end(), rec.target.begin(), rec.target.end());
      seq.push_back(vocab_.eov());
      per_clause[rec.clause_id].push_back(std::move(seq));
    }
    for (const auto& [clause, corpus] : per_clause)
      few_models_[clause] =
          std::make_shared<NgramModel>(train_ngram(corpus, s.few_order, few_sm, &vocab_));

    auto whole = prepare_whole_query_records(train, config_.whole_query_prompt, vocab_);
    std::vector<std::vector<TokenId>> whole_corpus;
    int max_sql_len = 1;
    for (const auto& rec : whole) {
      std::vector<TokenId> seq = rec.context;
      seq.insert(seq.end(), rec.target.begin(), rec.target.end());
      seq.push_back(vocab_.eov());
      whole_corpus.push_back(std::move(seq));
      max_sql_len = std::max(max_sql_len, static_cast<int>(rec.target.size()));
    }
    few_models_["query"] =
        std::make_shared<NgramModel>(train_ngram(whole_corpus, s.few_order, few_sm, &vocab_));
    whole_query_max_len_ = max_sql_len + 4;
  }

  void append_clause_context(const ClauseTrace& ct, std::vector<TokenId>& running) const {
    std::string text;
    if (config_.context_style == ContextStyle::kCanonical) {
      text = ct.canonical.text;
    } else if (ct.clause.sql.has_value()) {
      text = *ct.clause.sql;
    }
    if (text.empty()) return;
    std::vector<TokenId> toks = tokenize(text, vocab_);
    running.insert(running.end(), toks.begin(), toks.end());
  }

  std::vector<TokenId> build_context(const ClauseSpec& spec, const std::string& utterance,
                                     const std::vector<TokenId>& running) const {
    std::vector<TokenId> ctx = tokenize(utterance, vocab_);
    if (spec.dependency == DependencyMode::kSequential)
      ctx.insert(ctx.end(), running.begin(), running.end());
    std::vector<TokenId> prompt = tokenize(spec.prompt.text, vocab_);
    ctx.insert(ctx.end(), prompt.begin(), prompt.end());
    return ctx;
  }

  CandidateTrie clause_trie(const ClauseSpec& spec, const std::string& utterance) const {
    CandidateSet cands = collect_candidates(spec, config_.schema, utterance,
                                            training_values(spec.id), config_.copy_ngram_max);
    // Values containing words outside the shared vocabulary cannot be
    // represented in the index space and are dropped.
    CandidateSet usable;
    usable.clause_id = cands.clause_id;
    for (const auto& [value, prov] : cands.values) {
      std::vector<TokenId> toks = tokenize(value, vocab_);
      bool ok = !toks.empty();
      for (TokenId t : toks) ok = ok && t != vocab_.unk();
      if (ok)
        for (Provenance p : prov) usable.add(value, p);
    }
    if (usable.empty())
      throw ConfigError("no in-vocabulary candidate values for clause " + spec.id);
    return build_trie(usable, vocab_);
  }

  ClauseTrace decode_clause(const ClauseSpec& spec, const std::string& utterance,
                            const std::vector<TokenId>& running, const AblationFlags& flags,
                            const EnsembleConfig& cfg, const LmScorer* few) const {
    ClauseTrace ct;
    ct.clause_id = spec.id;
    ct.prompt = spec.prompt.text;
    ct.context = build_context(spec, utterance, running);

    bool need_trie = cfg.gamma < 1.0 || cfg.uncertainty != UncertaintyMode::kOff;
    CandidateTrie trie;
    if (need_trie) trie = clause_trie(spec, utterance);

    DecodeOutcome outcome;
    if (cfg.uncertainty != UncertaintyMode::kOff && !flags.zero_off) {
      EnsembleConfig few_cfg = cfg;
      few_cfg.gamma = 1.0;
      EnsembleConfig zero_cfg = cfg;
      zero_cfg.gamma = 0.0;
      DecodeOutcome few_out =
          decode_value(*few, nullptr, trie, ct.context, few_cfg, vocab_);
      DecodeOutcome zero_out =
          decode_value(*few, zero_model_.get(), trie, ct.context, zero_cfg, vocab_);
      if (zero_out.steps.empty() || !zero_out.steps.front().zero_rescaled.has_value())
        throw DecodeError("uncertainty selection: no rescaled zero-shot step for clause " +
                          spec.id);
      std::vector<TokenId> selected = select_by_uncertainty(
          *zero_out.steps.front().zero_rescaled, cfg.uncertainty, cfg.uncertainty_threshold,
          few_out.tokens, zero_out.tokens);
      outcome = selected == zero_out.tokens ? std::move(zero_out) : std::move(few_out);
    } else {
      outcome = decode_value(*few, cfg.gamma < 1.0 ? zero_model_.get() : nullptr, trie,
                             ct.context, cfg, vocab_);
    }

    ct.off_trie = outcome.off_trie;
    ct.degenerate_rescale = outcome.degenerate_rescale;
    ct.steps = std::move(outcome.steps);
    if (outcome.matched_value.has_value()) {
      ct.value = *outcome.matched_value;
    } else if (outcome.tokens.empty()) {
      ct.value = "None";
    } else {
      ct.value = detokenize(outcome.tokens, vocab_);
    }
    if (ct.value.empty()) ct.value = "None";
    ct.canonical = fill_slot(spec.prompt, ct.value);
    ct.clause = clause_from_canonical(ct.canonical, spec);
    return ct;
  }

  ParseTrace parse_whole_query(const std::string& utterance, const AblationFlags& flags) const {
    ParseTrace trace;
    trace.utterance = utterance;
    Scheme whole = whole_query_scheme(config_.whole_query_prompt);
    const ClauseSpec& spec = whole.clauses.front();
    EnsembleConfig cfg = config_.whole_query_ensemble;
    if (flags.zero_off) cfg.gamma = 1.0;
    cfg.max_value_len = std::max(cfg.max_value_len, whole_query_max_len_);
    try {
      ClauseTrace ct = decode_clause(spec, utterance, {}, flags, cfg, &few_model("query"));
      trace.sql = compose({ct.clause}, whole);
      trace.clauses.push_back(std::move(ct));
    } catch (const Error& e) {
      trace.ok = false;
      trace.error = e.what();
    }
    return trace;
  }

  bool clause_prediction_correct(const ClauseSpec& spec, const Example& ex,
                                 double gamma) const {
    // Teacher forcing: contexts come from gold previous clauses.
    std::vector<TokenId> running;
    for (const auto& prev : config_.scheme.clauses) {
      if (prev.ordinal >= spec.ordinal) break;
      if (prev.dependency != DependencyMode::kSequential) continue;
      std::string value = detail::clause_value_or_none(ex, prev.id);
      std::string text;
      if (config_.context_style == ContextStyle::kCanonical) {
        text = fill_slot(prev.prompt, value).text;
      } else if (!detail::is_none_value(value)) {
        Clause m = clause_from_canonical(fill_slot(prev.prompt, value), prev);
        if (m.sql.has_value()) text = *m.sql;
      }
      if (!text.empty()) {
        std::vector<TokenId> toks = tokenize(text, vocab_);
        running.insert(running.end(), toks.begin(), toks.end());
      }
    }
    EnsembleConfig cfg = config_.clause_config(spec.id, false);
    cfg.gamma = gamma;
    cfg.uncertainty = UncertaintyMode::kOff;
    try {
      ClauseTrace ct = decode_clause(spec, ex.utterance, running, AblationFlags{}, cfg,
                                     &few_model(spec.id));
      return detail::values_equal(ct.value, detail::clause_value_or_none(ex, spec.id));
    } catch (const Error&) {
      return false;
    }
  }

  PipelineConfig config_;
  Dataset dataset_;
  Vocabulary vocab_;
  std::shared_ptr<NgramModel> zero_model_;
  std::map<std::string, std::shared_ptr<NgramModel>> few_models_;
  std::map<std::string, std::vector<std::string>> training_values_;
  int whole_query_max_len_ = 64;
};

}  // namespace seqfill
