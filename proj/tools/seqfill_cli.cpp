// seqfill command-line front end.
//
// Subcommands: train, split, parse, eval, ablate, tune-gamma.
// Exit codes: 0 success, 1 data error, 2 config error, 3 runtime error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "seqfill/dataset.hpp"
#include "seqfill/grammar.hpp"
#include "seqfill/ngram.hpp"
#include "seqfill/pipeline.hpp"
#include "seqfill/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace seqfill;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(path + ": malformed JSON (" + std::string(e.what()) + ")");
  }
  return j;
}

void write_output(const json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw DataError("cannot write file: " + out_path);
  out << j.dump(2) << "\n";
}

UncertaintyMode uncertainty_from_string(const std::string& s) {
  if (s == "off") return UncertaintyMode::kOff;
  if (s == "moc") return UncertaintyMode::kMoC;
  if (s == "roc") return UncertaintyMode::kRoC;
  throw ConfigError("unknown uncertainty mode: " + s + " (expected off|moc|roc)");
}

EnsembleConfig ensemble_from_json(const json& j, EnsembleConfig base) {
  if (j.contains("gamma")) base.gamma = j.at("gamma").get<double>();
  if (j.contains("max_value_len")) base.max_value_len = j.at("max_value_len").get<int>();
  if (j.contains("uncertainty"))
    base.uncertainty = uncertainty_from_string(j.at("uncertainty").get<std::string>());
  if (j.contains("threshold")) base.uncertainty_threshold = j.at("threshold").get<double>();
  base.validate();
  return base;
}

NgramSmoothing smoothing_from_json(const json& j) {
  NgramSmoothing s;
  s.order_weights = j.get<std::vector<double>>();
  return s;
}

// Engine assembled from a config file. Relative paths inside the config
// resolve against the config file's directory.
struct LoadedRun {
  PipelineConfig pipeline;
  Dataset dataset;
  std::vector<std::string> corpus;
  ModelSettings models;
};

LoadedRun load_run(const std::string& config_path) {
  json cfg = read_json_file(config_path);
  fs::path base = fs::path(config_path).parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };

  LoadedRun run;
  if (!cfg.contains("scheme")) throw ConfigError(config_path + ": missing 'scheme'");
  const json& scheme = cfg["scheme"];
  if (scheme.is_string()) {
    std::string name = scheme.get<std::string>();
    if (name == "geoquery") run.pipeline.scheme = geoquery_scheme();
    else if (name == "ecommerce") run.pipeline.scheme = ecommerce_scheme();
    else if (name == "synthetic_ecommerce") run.pipeline.scheme = synthetic_ecommerce_scheme();
    else run.pipeline.scheme = scheme_from_json(read_json_file(resolve(name)));
  } else {
    run.pipeline.scheme = scheme_from_json(scheme);
  }

  if (cfg.contains("schema")) {
    const json& schema = cfg["schema"];
    run.pipeline.schema = schema.is_string()
                              ? Schema::from_json(read_json_file(resolve(schema.get<std::string>())))
                              : Schema::from_json(schema);
  }

  if (!cfg.contains("dataset")) throw ConfigError(config_path + ": missing 'dataset'");
  run.dataset = load_dataset(resolve(cfg.at("dataset").get<std::string>()));
  if (!cfg.contains("corpus")) throw ConfigError(config_path + ": missing 'corpus'");
  run.corpus = load_corpus_lines(resolve(cfg.at("corpus").get<std::string>()));

  if (cfg.contains("defaults"))
    run.pipeline.defaults = ensemble_from_json(cfg["defaults"], EnsembleConfig{});
  if (cfg.contains("per_clause"))
    for (const auto& [clause, j] : cfg["per_clause"].items())
      run.pipeline.per_clause[clause] = ensemble_from_json(j, run.pipeline.defaults);
  if (cfg.contains("whole_query"))
    run.pipeline.whole_query_ensemble =
        ensemble_from_json(cfg["whole_query"], run.pipeline.whole_query_ensemble);
  if (cfg.contains("whole_query_prompt"))
    run.pipeline.whole_query_prompt = cfg.at("whole_query_prompt").get<std::string>();
  if (cfg.contains("context_style")) {
    std::string style = cfg.at("context_style").get<std::string>();
    if (style == "sql") run.pipeline.context_style = ContextStyle::kSqlClause;
    else if (style == "canonical") run.pipeline.context_style = ContextStyle::kCanonical;
    else throw ConfigError("unknown context_style: " + style + " (expected sql|canonical)");
  }
  if (cfg.contains("copy_ngram_max"))
    run.pipeline.copy_ngram_max = cfg.at("copy_ngram_max").get<int>();

  if (cfg.contains("models")) {
    const json& m = cfg["models"];
    if (m.contains("few_order")) run.models.few_order = m.at("few_order").get<int>();
    if (m.contains("zero_order")) run.models.zero_order = m.at("zero_order").get<int>();
    if (m.contains("few_weights")) run.models.few_smoothing = smoothing_from_json(m["few_weights"]);
    if (m.contains("zero_weights"))
      run.models.zero_smoothing = smoothing_from_json(m["zero_weights"]);
  }
  return run;
}

Engine make_engine(const std::string& config_path) {
  LoadedRun run = load_run(config_path);
  return Engine(std::move(run.pipeline), std::move(run.dataset), std::move(run.corpus),
                run.models);
}

// Dataset reader for `split`: like load_dataset but the split field is
// optional (it is about to be reassigned) and leakage is not checked yet.
std::vector<Example> load_unsplit_examples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset: " + path);
  std::vector<Example> examples;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": malformed JSON (" +
                      std::string(e.what()) + ")");
    }
    Example ex;
    try {
      ex.utterance = j.at("utterance").get<std::string>();
      ex.sql = j.at("sql").get<std::string>();
      if (j.contains("clauses"))
        for (const auto& [id, v] : j["clauses"].items())
          ex.clauses[id] = v.is_null() ? std::optional<std::string>{} : v.get<std::string>();
      ex.template_id = j.contains("template") ? j.at("template").get<std::string>()
                                              : anonymize_template(ex.sql);
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": missing field (" +
                      std::string(e.what()) + ")");
    }
    examples.push_back(std::move(ex));
  }
  return examples;
}

int run(int argc, char** argv) {
  CLI::App app{"Sequential prompt-filling semantic parser"};
  app.require_subcommand(1);

  // --- train ---------------------------------------------------------------
  auto* train = app.add_subcommand("train", "Train an n-gram model on a line corpus");
  std::string train_corpus, train_out;
  int train_order = 3;
  std::vector<double> train_weights;
  train->add_option("--corpus", train_corpus, "corpus file, one sequence per line")->required();
  train->add_option("--order", train_order, "n-gram order");
  train->add_option("--weights", train_weights,
                    "interpolation weights, length order+1 (uniform floor first)");
  train->add_option("--out", train_out, "output model JSON (default: stdout)");
  train->callback([&] {
    auto lines = load_corpus_lines(train_corpus);
    Vocabulary vocab;
    for (const auto& line : lines)
      for (const auto& w : split_words(line)) vocab.add(w);
    std::vector<std::vector<TokenId>> corpus;
    for (const auto& line : lines) corpus.push_back(tokenize(line, vocab));
    NgramSmoothing smoothing = train_weights.empty() ? NgramSmoothing::defaults(train_order)
                                                     : NgramSmoothing{train_weights};
    NgramModel model = train_ngram(corpus, train_order, smoothing, &vocab);
    write_output(model.to_json(), train_out);
  });

  // --- split ---------------------------------------------------------------
  auto* split_cmd = app.add_subcommand("split", "Assign compositional train/dev/test splits");
  std::string split_in, split_out;
  std::vector<double> split_ratios{0.6, 0.2, 0.2};
  unsigned int split_seed = 1;
  std::vector<std::string> split_forced;
  split_cmd->add_option("--in", split_in, "input dataset JSONL")->required();
  split_cmd->add_option("--out", split_out, "output dataset JSONL")->required();
  split_cmd->add_option("--ratios", split_ratios, "train/dev/test ratios")->expected(3);
  split_cmd->add_option("--seed", split_seed, "shuffle seed");
  split_cmd->add_option("--forced", split_forced,
                        "template substrings kept out of the train split");
  split_cmd->callback([&] {
    auto examples = load_unsplit_examples(split_in);
    Dataset ds = make_compositional_split(
        std::move(examples), {split_ratios[0], split_ratios[1], split_ratios[2]}, split_seed,
        split_forced);
    save_dataset(ds, split_out);
    std::cout << "train " << ds.split(Split::kTrain).size() << ", dev "
              << ds.split(Split::kDev).size() << ", test " << ds.split(Split::kTest).size()
              << "\n";
  });

  // --- parse ---------------------------------------------------------------
  auto* parse = app.add_subcommand("parse", "Parse a single utterance into SQL");
  std::string parse_config, parse_utterance, parse_out;
  bool parse_steps = false;
  bool parse_no_zero = false, parse_no_seq = false;
  parse->add_option("--config", parse_config, "run config JSON")->required();
  parse->add_option("--utterance", parse_utterance, "natural-language input")->required();
  parse->add_option("--out", parse_out, "trace output JSON (default: stdout)");
  parse->add_flag("--steps", parse_steps, "include per-step decode records");
  parse->add_flag("--no-zero", parse_no_zero, "disable the zero-shot ensemble");
  parse->add_flag("--no-seq", parse_no_seq, "decode the whole query in one slot");
  parse->callback([&] {
    Engine engine = make_engine(parse_config);
    ParseTrace trace = engine.parse_utterance(
        parse_utterance, AblationFlags{.seq_off = parse_no_seq, .zero_off = parse_no_zero});
    write_output(trace.to_json(parse_steps), parse_out);
    if (!trace.ok) throw DecodeError(trace.error);
  });

  // --- eval ----------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "Evaluate exact match on a split");
  std::string eval_config, eval_split = "test", eval_out;
  eval->add_option("--config", eval_config, "run config JSON")->required();
  eval->add_option("--split", eval_split, "train|dev|test");
  eval->add_option("--out", eval_out, "report output JSON (default: stdout)");
  eval->callback([&] {
    Engine engine = make_engine(eval_config);
    EvalReport report = engine.evaluate(split_from_string(eval_split));
    write_output(report.to_json(), eval_out);
  });

  // --- ablate --------------------------------------------------------------
  auto* ablate = app.add_subcommand("ablate", "Run the full/-seq/-zero ablation table");
  std::string ablate_config, ablate_split = "test", ablate_out;
  ablate->add_option("--config", ablate_config, "run config JSON")->required();
  ablate->add_option("--split", ablate_split, "train|dev|test");
  ablate->add_option("--out", ablate_out, "table output JSON (default: stdout)");
  ablate->callback([&] {
    Engine engine = make_engine(ablate_config);
    json out = json::object();
    for (const auto& [row, report] : engine.run_ablations(split_from_string(ablate_split)))
      out[row] = report.to_json();
    write_output(out, ablate_out);
  });

  // --- tune-gamma ------------------------------------------------------------
  auto* tune = app.add_subcommand("tune-gamma", "Grid-search per-clause ensemble weights");
  std::string tune_config, tune_out;
  double tune_step = 0.05;
  bool tune_eval = false;
  tune->add_option("--config", tune_config, "run config JSON")->required();
  tune->add_option("--step", tune_step, "grid step (must divide 1 evenly)");
  tune->add_option("--out", tune_out, "selected gammas JSON (default: stdout)");
  tune->add_flag("--eval-test", tune_eval, "also report test exact match with tuned gammas");
  tune->callback([&] {
    Engine engine = make_engine(tune_config);
    auto gammas = engine.grid_search_gamma(tune_step);
    json out = {{"gammas", gammas}};
    if (tune_eval) {
      engine.apply_gammas(gammas);
      out["test_report"] = engine.evaluate(Split::kTest).to_json();
    }
    write_output(out, tune_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad flags are configuration errors
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
