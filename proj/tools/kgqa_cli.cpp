// kgqa: command-line front end for the question answering pipeline, its
// evaluation harness and the dataset tools.
//
// Exit codes: 0 ok, 1 usage, 2 configuration, 3 runtime. Failures print one
// JSON object {"error", "message"} on stderr.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kgqa/dataset.hpp"
#include "kgqa/entity_linking.hpp"
#include "kgqa/eval.hpp"
#include "kgqa/pipeline.hpp"
#include "kgqa/sequence_labeling.hpp"
#include "kgqa/translator.hpp"

namespace {

using nlohmann::json;
using namespace kgqa;

constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

int fail(std::string_view kind, std::string_view message, int code) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
  return code;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  out << content;
}

std::vector<QAInstance> read_dataset(const std::string& path) {
  LoadResult r = load_dataset(path);
  for (const auto& issue : r.issues)
    std::cerr << json{{"warning", "skipped line"}, {"file", path}, {"line", issue.line},
                      {"message", issue.message}}
                     .dump()
              << '\n';
  return r.instances;
}

// Plain text (one question per line, ids q1, q2, ...) or JSONL with
// {"id", "question"} objects.
std::vector<Question> read_questions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::vector<Question> out;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    if (line.front() == '{') {
      auto j = json::parse(line);
      out.push_back({j.at("id").get<std::string>(), j.at("question").get<std::string>()});
    } else {
      out.push_back({"q" + std::to_string(out.size() + 1), std::string(text::trim(line))});
    }
  }
  return out;
}

json answer_summary(const PipelineResult& r) {
  const CandidateOutcome* c = r.chosen();
  json out{{"question_id", r.question.id}, {"verdict", r.verdict}};
  out["query"] = c ? json(c->filled.query) : json(nullptr);
  out["complete"] = c ? c->filled.complete : false;
  out["answer"] = c && c->answer ? json(*c->answer) : json(nullptr);
  return out;
}

struct AnswerArgs {
  std::string question, id, file, config, trace;
};

int run_answer(const AnswerArgs& a) {
  Pipeline p = Pipeline::from_config(PipelineConfig::load(a.config), &std::cerr);
  std::vector<Question> questions;
  if (!a.file.empty()) {
    questions = read_questions(a.file);
  } else {
    questions.push_back({a.id.empty() ? "q1" : a.id, a.question});
  }
  json traces = json::array();
  for (const auto& q : questions) {
    PipelineResult r = p.answer(q);
    std::cout << answer_summary(r).dump() << '\n';
    traces.push_back(r.trace());
  }
  if (!a.trace.empty()) write_text(a.trace, (traces.size() == 1 ? traces[0] : traces).dump(2) + "\n");
  return 0;
}

struct EvaluateArgs {
  std::string dataset, config, report, predictions, system = "pipeline";
};

int run_evaluate(const EvaluateArgs& a) {
  PipelineConfig cfg = PipelineConfig::load(a.config);
  if (cfg.endpoint.empty()) throw Error(ErrorCode::kConfigError, "evaluation needs an endpoint");
  std::vector<QAInstance> gold = read_dataset(a.dataset);
  std::vector<EvalInput> inputs;
  std::shared_ptr<KbClient> kb;

  if (!a.predictions.empty()) {
    // {"question_id", "query"} per line, e.g. a translation model's output.
    std::map<std::string, std::string> predicted;
    std::ifstream in(a.predictions);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open " + a.predictions);
    for (std::string line; std::getline(in, line);) {
      if (text::trim(line).empty()) continue;
      auto j = json::parse(line);
      predicted[j.at("question_id").get<std::string>()] = j.at("query").get<std::string>();
    }
    for (const auto& g : gold) {
      EvalInput in;
      in.question_id = g.id;
      in.reference_query = g.query;
      auto it = predicted.find(g.id);
      in.predicted_complete = it != predicted.end();
      if (it != predicted.end()) in.predicted_query = it->second;
      inputs.push_back(std::move(in));
    }
    KbClientOptions opts;
    opts.timeout = cfg.timeout;
    opts.min_request_interval = cfg.rate_limit;
    opts.offline = cfg.offline;
    if (!cfg.cache_dir.empty()) opts.cache_dir = cfg.cache_dir;
    kb = std::make_shared<KbClient>(cfg.endpoint, opts);
  } else {
    Pipeline p = Pipeline::from_config(cfg, &std::cerr);
    for (const auto& g : gold) inputs.push_back(evaluation_input(p.answer({g.id, g.question}), g));
    kb = p.kb();
  }

  EvalReport report = evaluate_corpus(inputs, *kb);
  if (!a.report.empty()) write_text(a.report, json(report).dump(2) + "\n");
  std::cout << format_report_table(report, a.system);
  return 0;
}

struct CleanArgs {
  std::string in, out, report;
};

int run_clean(const CleanArgs& a) {
  std::vector<QAInstance> all = read_dataset(a.in);
  std::vector<QAInstance> kept;
  std::map<std::string, int> by_reason;
  for (CleaningReason r : {CleaningReason::kNullText, CleaningReason::kSyntheticLeak,
                           CleaningReason::kAnswerInQuestion, CleaningReason::kBadLength,
                           CleaningReason::kInvalidTokens})
    by_reason[std::string(cleaning_reason_name(r))] = 0;
  json discarded = json::array();
  for (const auto& inst : all) {
    CleaningVerdict v = clean(inst);
    if (v.keep) {
      kept.push_back(inst);
      continue;
    }
    json reasons = json::array();
    for (CleaningReason r : v.reasons) {
      reasons.push_back(cleaning_reason_name(r));
      ++by_reason[std::string(cleaning_reason_name(r))];
    }
    discarded.push_back({{"id", inst.id}, {"reasons", reasons}});
  }
  save_dataset(a.out, kept);
  json report{{"total", all.size()},
              {"kept", kept.size()},
              {"discarded", all.size() - kept.size()},
              {"discard_rate", all.empty() ? 0.0 : double(all.size() - kept.size()) / double(all.size())},
              {"reasons", by_reason},
              {"discarded_instances", discarded}};
  if (!a.report.empty()) write_text(a.report, report.dump(2) + "\n");
  std::cout << report["discarded"] << " of " << report["total"] << " instances discarded\n";
  return 0;
}

int run_link(const std::string& question, const std::string& config) {
  PipelineConfig cfg = PipelineConfig::load(config);
  SameAsStore mapping = cfg.mapping_path.empty() ? SameAsStore{} : SameAsStore::load(cfg.mapping_path);
  ElEnsemble ensemble(cfg.el_systems, std::move(mapping));
  std::cout << json(ensemble.link(question, &std::cerr)).dump(2) << '\n';
  return 0;
}

int run_template(const std::string& question, const std::string& id, const std::string& config,
                 std::size_t k) {
  PipelineConfig cfg = PipelineConfig::load(config);
  Pipeline p = Pipeline::from_config(cfg, &std::cerr);
  Question q{id.empty() ? "q1" : id, question};
  std::vector<LabeledSpan> labels = p.labeller().label(q);
  std::cout << json(p.translator().translate(q, k == 0 ? cfg.k : k, labels)).dump(2) << '\n';
  return 0;
}

int run_calibrate(const std::string& train, const std::string& config, const std::string& config_out) {
  PipelineConfig cfg = PipelineConfig::load(config);
  SameAsStore mapping = cfg.mapping_path.empty() ? SameAsStore{} : SameAsStore::load(cfg.mapping_path);
  ElEnsemble ensemble(cfg.el_systems, std::move(mapping));
  std::vector<CalibrationExample> examples;
  for (const auto& inst : read_dataset(train)) {
    CalibrationExample ex;
    for (const auto& a : inst.annotations)
      if (auto q = wikidata_qid(a.kb_id)) ex.gold_qids.insert(*q);
    ex.outputs = ensemble.candidates(inst.question);
    examples.push_back(std::move(ex));
  }
  std::vector<ElSystemConfig> calibrated = calibrate_precision_weights(examples, cfg.el_systems);

  std::ifstream in(config);
  json raw = json::parse(in);
  json weights = json::object();
  for (auto& s : raw["el"]["systems"]) {
    for (const auto& c : calibrated) {
      if (c.system_id == s["id"].get<std::string>()) {
        s["precision_weight"] = c.precision_weight;
        weights[c.system_id] = c.precision_weight;
      }
    }
  }
  write_text(config_out, raw.dump(2) + "\n");
  std::cout << weights.dump(2) << '\n';
  return 0;
}

int run_build_index(const std::string& train, const std::string& out) {
  std::vector<std::string> skipped;
  auto pairs = training_pairs(read_dataset(train), &skipped);
  for (const auto& s : skipped) std::cerr << json{{"warning", "skipped instance"}, {"message", s}}.dump() << '\n';
  RetrievalTranslator index = RetrievalTranslator::build(pairs);
  index.save(out);
  std::cout << json{{"entries", index.size()}, {"skipped", skipped.size()}}.dump() << '\n';
  return 0;
}

int run_build_lexicon(const std::string& train, const std::string& out) {
  Lexicon lexicon = build_baseline_lexicon(all_annotations(read_dataset(train)));
  lexicon.save(out);
  std::cout << json{{"entries", lexicon.size()}}.dump() << '\n';
  return 0;
}

// Labels TSV: qid<TAB>label per line.
int run_convert(const std::string& in_path, const std::string& split, const std::string& labels_path,
                const std::string& out) {
  std::ifstream in(in_path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + in_path);
  json raw = json::parse(in);
  std::map<std::string, std::string> labels;
  if (!labels_path.empty()) {
    std::ifstream lin(labels_path);
    if (!lin) throw Error(ErrorCode::kIoError, "cannot open " + labels_path);
    for (std::string line; std::getline(lin, line);) {
      auto tab = line.find('\t');
      if (tab == std::string::npos) continue;
      if (auto q = wikidata_qid(line.substr(0, tab))) labels[*q] = line.substr(tab + 1);
    }
  }
  auto instances = convert_lcquad(raw, split == "test" ? Split::kTest : Split::kTrain, labels);
  save_dataset(out, instances);
  std::cout << json{{"instances", instances.size()}}.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Question answering over Wikidata: pipeline, evaluation and dataset tools"};
  app.require_subcommand(1);

  AnswerArgs answer;
  auto* answer_cmd = app.add_subcommand("answer", "Translate questions into SPARQL and execute them");
  auto* q_opt = answer_cmd->add_option("--question", answer.question, "Question text");
  auto* f_opt = answer_cmd->add_option("--file", answer.file, "File with one question per line (text or JSONL)");
  q_opt->excludes(f_opt);
  answer_cmd->add_option("--id", answer.id, "Question id used by replay components (default q1)");
  answer_cmd->add_option("--config", answer.config, "Pipeline configuration (JSON)")->required();
  answer_cmd->add_option("--trace", answer.trace, "Write the trace JSON here");

  EvaluateArgs evaluate;
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate the pipeline or external predictions on a dataset");
  eval_cmd->add_option("--dataset", evaluate.dataset, "Dataset JSONL")->required();
  eval_cmd->add_option("--config", evaluate.config, "Pipeline configuration (JSON)")->required();
  eval_cmd->add_option("--report", evaluate.report, "Write the JSON report here");
  eval_cmd->add_option("--predictions", evaluate.predictions, "Evaluate these {question_id, query} lines instead");
  eval_cmd->add_option("--system", evaluate.system, "System name for the table");

  CleanArgs cleaning;
  auto* clean_cmd = app.add_subcommand("clean", "Apply the dataset quality heuristics");
  clean_cmd->add_option("--in", cleaning.in, "Input dataset JSONL")->required();
  clean_cmd->add_option("--out", cleaning.out, "Kept instances JSONL")->required();
  clean_cmd->add_option("--report", cleaning.report, "Verdict report JSON");

  std::string question, id, config, train, out, config_out, split = "train", labels_path;
  std::size_t k = 0;
  auto* link_cmd = app.add_subcommand("link", "Ranked entities from the linker ensemble");
  link_cmd->add_option("--question", question)->required();
  link_cmd->add_option("--config", config)->required();

  auto* template_cmd = app.add_subcommand("template", "Top-k template candidates");
  template_cmd->add_option("--question", question)->required();
  template_cmd->add_option("--id", id, "Question id used by replay components (default q1)");
  template_cmd->add_option("--config", config)->required();
  template_cmd->add_option("--k", k, "Number of candidates (default from config)");

  auto* calibrate_cmd = app.add_subcommand("calibrate", "Set linker precision weights from training data");
  calibrate_cmd->add_option("--train", train)->required();
  calibrate_cmd->add_option("--config", config)->required();
  calibrate_cmd->add_option("--config-out", config_out)->required();

  auto* index_cmd = app.add_subcommand("build-index", "Build the retrieval translator index");
  index_cmd->add_option("--train", train)->required();
  index_cmd->add_option("--out", out)->required();

  auto* lexicon_cmd = app.add_subcommand("build-lexicon", "Build the baseline labeller lexicon");
  lexicon_cmd->add_option("--train", train)->required();
  lexicon_cmd->add_option("--out", out)->required();

  auto* convert_cmd = app.add_subcommand("convert", "Convert an LC-QuAD 2.0 JSON export to dataset JSONL");
  convert_cmd->add_option("--in", train, "LC-QuAD 2.0 JSON file")->required();
  convert_cmd->add_option("--split", split)->check(CLI::IsMember({"train", "test"}));
  convert_cmd->add_option("--labels", labels_path, "TSV of qid<TAB>English label");
  convert_cmd->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("UsageError", e.what(), kExitUsage);
  }

  try {
    if (answer_cmd->parsed()) {
      if (answer.question.empty() && answer.file.empty())
        return fail("UsageError", "answer needs --question or --file", kExitUsage);
      return run_answer(answer);
    }
    if (eval_cmd->parsed()) return run_evaluate(evaluate);
    if (clean_cmd->parsed()) return run_clean(cleaning);
    if (link_cmd->parsed()) return run_link(question, config);
    if (template_cmd->parsed()) return run_template(question, id, config, k);
    if (calibrate_cmd->parsed()) return run_calibrate(train, config, config_out);
    if (index_cmd->parsed()) return run_build_index(train, out);
    if (lexicon_cmd->parsed()) return run_build_lexicon(train, out);
    if (convert_cmd->parsed()) return run_convert(train, split, labels_path, out);
  } catch (const Error& e) {
    return fail(error_code_name(e.code()), e.detail(),
                e.code() == ErrorCode::kConfigError ? kExitConfig : kExitRuntime);
  } catch (const nlohmann::json::exception& e) {
    return fail("SchemaError", e.what(), kExitRuntime);
  } catch (const std::exception& e) {
    return fail("RuntimeError", e.what(), kExitRuntime);
  }
  return kExitUsage;
}
