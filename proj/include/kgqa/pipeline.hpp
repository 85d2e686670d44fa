#pragma once

// Question -> (sequence labels, linked entities, template candidates) ->
// slot filling -> query, optionally executed.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgqa/answer_set.hpp"
#include "kgqa/dataset.hpp"
#include "kgqa/el_backends.hpp"
#include "kgqa/entity_linking.hpp"
#include "kgqa/error.hpp"
#include "kgqa/eval.hpp"
#include "kgqa/kb_client.hpp"
#include "kgqa/sequence_labeling.hpp"
#include "kgqa/slot_filling.hpp"
#include "kgqa/text.hpp"
#include "kgqa/translator.hpp"

namespace kgqa {

enum class AnswerMode { kFirst, kFirstNonEmpty };

struct ComponentChoice {
  std::string type;  // "retrieval"/"replay" or "baseline"/"replay"
  std::string path;
};

struct PipelineConfig {
  ComponentChoice translator;
  ComponentChoice labeller;
  std::vector<ElSystemConfig> el_systems;
  std::string mapping_path;  // empty: no sameAs mapping
  std::string endpoint;      // URL or triple fixture; empty: no execution
  std::size_t k = kDefaultTemplateCandidates;
  AnswerMode mode = AnswerMode::kFirst;
  std::string cache_dir;
  std::chrono::milliseconds timeout{60000};
  std::chrono::milliseconds rate_limit{1000};
  bool offline = false;

  // Relative paths resolve against `base`. KGQA_ENDPOINT and KGQA_CACHE_DIR
  // override the endpoint and cache settings.
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base = {}) {
    auto resolve = [&](const std::string& p) -> std::string {
      if (p.empty() || is_http_url(p) || std::filesystem::path(p).is_absolute()) return p;
      return (base / p).lexically_normal().string();
    };
    auto component = [&](const char* key) {
      if (!j.contains(key) || !j[key].is_object())
        throw Error(ErrorCode::kConfigError, std::string("missing \"") + key + "\" section");
      const auto& c = j[key];
      ComponentChoice out{c.value("type", ""), resolve(c.value("path", ""))};
      if (out.path.empty()) throw Error(ErrorCode::kConfigError, std::string(key) + ".path is required");
      return out;
    };

    PipelineConfig cfg;
    try {
      cfg.translator = component("translator");
      if (cfg.translator.type != "retrieval" && cfg.translator.type != "replay")
        throw Error(ErrorCode::kConfigError, "translator.type must be \"retrieval\" or \"replay\"");
      cfg.labeller = component("labeller");
      if (cfg.labeller.type != "baseline" && cfg.labeller.type != "replay")
        throw Error(ErrorCode::kConfigError, "labeller.type must be \"baseline\" or \"replay\"");

      const auto& el = j.value("el", nlohmann::json::object());
      cfg.mapping_path = resolve(el.value("mapping", ""));
      for (const auto& s : el.value("systems", nlohmann::json::array())) {
        ElSystemConfig sys;
        sys.system_id = s.at("id").get<std::string>();
        sys.endpoint = resolve(s.at("endpoint").get<std::string>());
        std::string kb = s.value("kb", "wikidata");
        auto parsed = parse_target_kb(kb);
        if (!parsed) throw Error(ErrorCode::kConfigError, sys.system_id + ": unknown target KB '" + kb + "'");
        sys.target_kb = *parsed;
        sys.precision_weight = s.value("precision_weight", 0.0);
        sys.timeout = std::chrono::milliseconds(s.value("timeout_ms", 5000));
        cfg.el_systems.push_back(std::move(sys));
      }

      cfg.endpoint = resolve(j.value("endpoint", ""));
      cfg.k = j.value("k", kDefaultTemplateCandidates);
      std::string mode = j.value("mode", "FIRST");
      if (mode == "FIRST") {
        cfg.mode = AnswerMode::kFirst;
      } else if (mode == "FIRST_NONEMPTY") {
        cfg.mode = AnswerMode::kFirstNonEmpty;
      } else {
        throw Error(ErrorCode::kConfigError, "mode must be FIRST or FIRST_NONEMPTY");
      }
      cfg.cache_dir = resolve(j.value("cache_dir", ""));
      cfg.timeout = std::chrono::milliseconds(j.value("timeout_ms", 60000));
      cfg.rate_limit = std::chrono::milliseconds(j.value("rate_limit_ms", 1000));
      cfg.offline = j.value("offline", false);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kConfigError, e.what());
    }

    if (const char* e = std::getenv("KGQA_ENDPOINT"); e && *e) cfg.endpoint = e;
    if (const char* c = std::getenv("KGQA_CACHE_DIR"); c && *c) cfg.cache_dir = c;
    cfg.validate();
    return cfg;
  }

  static PipelineConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kConfigError, "cannot open config " + path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kConfigError, path + ": " + e.what());
    }
    return from_json(j, std::filesystem::path(path).parent_path());
  }

  void validate() const {
    if (k < 1) throw Error(ErrorCode::kConfigError, "k must be at least 1");
    auto must_exist = [](const std::string& p, const char* what) {
      if (!p.empty() && !is_http_url(p) && !std::filesystem::exists(p))
        throw Error(ErrorCode::kConfigError, std::string(what) + " not found: " + p);
    };
    must_exist(translator.path, "translator file");
    must_exist(labeller.path, "labeller file");
    must_exist(mapping_path, "sameAs mapping");
    must_exist(endpoint, "endpoint fixture");
    for (const auto& s : el_systems) must_exist(s.endpoint, "EL fixture");
  }
};

// One filled candidate, with its answer when executed.
struct CandidateOutcome {
  std::size_t candidate = 0;  // 0-based index into the template candidates
  FilledQuery filled;
  std::optional<AnswerSet> answer;
};

struct PipelineResult {
  Question question;
  bool answerable = false;
  std::string verdict;  // "answered" or the reason no query was produced
  std::optional<std::size_t> selected;  // index into outcomes
  std::vector<LabeledSpan> labels;
  RankedEntityList entities;
  std::vector<TemplateCandidate> candidates;
  std::vector<CandidateOutcome> outcomes;

  const CandidateOutcome* chosen() const { return selected ? &outcomes[*selected] : nullptr; }
  nlohmann::json trace() const;
};

inline nlohmann::json PipelineResult::trace() const {
  using nlohmann::json;
  json filled = json::array();
  for (const auto& o : outcomes) {
    json unfilled = json::array();
    for (const auto& p : o.filled.unfilled) unfilled.push_back(p.tag());
    json entry{{"candidate", o.candidate},
               {"query", o.filled.query},
               {"complete", o.filled.complete},
               {"unfilled", unfilled},
               {"assignments", o.filled.assignments}};
    if (o.answer) entry["answer"] = *o.answer;
    filled.push_back(std::move(entry));
  }
  json stages{{"sequence_labelling", {{"spans", labels}}},
              {"entity_linking", {{"entities", entities}}},
              {"translation", {{"candidates", candidates}}},
              {"slot_filling", {{"filled", filled}, {"selected", selected ? json(*selected) : json(nullptr)}}}};
  json out{{"question_id", question.id},
           {"question", question.text},
           {"verdict", verdict},
           {"stages", stages}};
  const CandidateOutcome* c = chosen();
  out["query"] = c ? json(c->filled.query) : json(nullptr);
  out["answer"] = c && c->answer ? json(*c->answer) : json(nullptr);
  return out;
}

// Components are loaded once and only read afterwards, so one Pipeline can
// answer questions from several threads.
class Pipeline {
 public:
  Pipeline(std::shared_ptr<const SequenceLabeller> labeller, std::shared_ptr<const Translator> translator,
           std::shared_ptr<const ElEnsemble> ensemble, std::shared_ptr<KbClient> kb, std::size_t k,
           AnswerMode mode)
      : labeller_(std::move(labeller)),
        translator_(std::move(translator)),
        ensemble_(std::move(ensemble)),
        kb_(std::move(kb)),
        k_(k),
        mode_(mode) {
    if (k_ < 1) throw Error(ErrorCode::kConfigError, "k must be at least 1");
  }

  static Pipeline from_config(const PipelineConfig& cfg, std::ostream* warnings = nullptr) {
    std::shared_ptr<const SequenceLabeller> labeller;
    if (cfg.labeller.type == "baseline") {
      labeller = std::make_shared<BaselineLabeller>(Lexicon::load(cfg.labeller.path));
    } else {
      labeller = std::make_shared<ReplayLabeller>(ReplayLabeller::load(cfg.labeller.path));
    }
    std::shared_ptr<const Translator> translator;
    if (cfg.translator.type == "retrieval") {
      translator = std::make_shared<RetrievalTranslator>(RetrievalTranslator::load(cfg.translator.path));
    } else {
      translator = std::make_shared<ReplayTranslator>(ReplayTranslator::load(cfg.translator.path, warnings));
    }
    SameAsStore mapping = cfg.mapping_path.empty() ? SameAsStore{} : SameAsStore::load(cfg.mapping_path);
    auto ensemble = std::make_shared<const ElEnsemble>(cfg.el_systems, std::move(mapping));
    std::shared_ptr<KbClient> kb;
    if (!cfg.endpoint.empty()) {
      KbClientOptions opts;
      opts.timeout = cfg.timeout;
      opts.min_request_interval = cfg.rate_limit;
      if (!cfg.cache_dir.empty()) opts.cache_dir = cfg.cache_dir;
      opts.offline = cfg.offline;
      kb = std::make_shared<KbClient>(cfg.endpoint, opts);
    }
    return Pipeline(std::move(labeller), std::move(translator), std::move(ensemble), std::move(kb), cfg.k,
                    cfg.mode);
  }

  const std::shared_ptr<KbClient>& kb() const { return kb_; }
  const ElEnsemble& ensemble() const { return *ensemble_; }
  const Translator& translator() const { return *translator_; }
  const SequenceLabeller& labeller() const { return *labeller_; }

  // Entity linking runs on its own thread while labelling and translation
  // (which may mask labelled mentions) run on the caller's.
  PipelineResult answer(const Question& question, std::ostream* el_log = nullptr) const {
    PipelineResult r;
    r.question = question;
    if (text::trim(question.text).empty()) {
      r.verdict = "unanswerable: empty question";
      return r;
    }
    auto el = std::async(std::launch::async, [this, &question, el_log] {
      return ensemble_->configs().empty() ? RankedEntityList{} : ensemble_->link(question.text, el_log);
    });

    std::optional<Error> translation_error;
    try {
      r.labels = labeller_->label(question);
      r.candidates = translator_->translate(question, k_, r.labels);
    } catch (const Error& e) {
      translation_error = e;
    }
    r.entities = el.get();

    if (translation_error) {
      if (translation_error->code() == ErrorCode::kNoCandidate ||
          translation_error->code() == ErrorCode::kMissingEntry) {
        r.verdict = std::string("unanswerable: ") + translation_error->what();
        return r;
      }
      throw *translation_error;
    }
    if (r.candidates.empty()) {
      r.verdict = "unanswerable: no template candidate";
      return r;
    }

    if (mode_ == AnswerMode::kFirst) {
      r.outcomes.push_back(fill_candidate(r, 0));
      r.selected = 0;
    } else {
      for (std::size_t i = 0; i < r.candidates.size(); ++i) {
        r.outcomes.push_back(fill_candidate(r, i));
        const auto& a = r.outcomes.back().answer;
        if (a && a->has_results()) {
          r.selected = i;
          break;
        }
      }
      if (!r.selected) r.selected = 0;
    }
    r.answerable = true;
    r.verdict = "answered";
    return r;
  }

 private:
  CandidateOutcome fill_candidate(const PipelineResult& r, std::size_t i) const {
    CandidateOutcome o{i, fill_slots(r.candidates[i].query_template, r.labels, r.entities), std::nullopt};
    if (kb_) o.answer = kb_->execute(o.filled.query);
    return o;
  }

  std::shared_ptr<const SequenceLabeller> labeller_;
  std::shared_ptr<const Translator> translator_;
  std::shared_ptr<const ElEnsemble> ensemble_;
  std::shared_ptr<KbClient> kb_;
  std::size_t k_;
  AnswerMode mode_;
};

// Pairs a pipeline run with its gold instance. Gold template, slots and
// labels are attached when the instance's annotations allow deriving them.
inline EvalInput evaluation_input(const PipelineResult& r, const QAInstance& gold) {
  EvalInput in;
  in.question_id = gold.id;
  in.reference_query = gold.query;
  const CandidateOutcome* c = r.chosen();
  if (c) {
    in.predicted_query = c->filled.query;
    in.predicted_complete = c->filled.complete;
    in.predicted_template = r.candidates[c->candidate].query_template.text();
    in.predicted_slots = c->filled.assignments;
  } else {
    in.predicted_complete = false;
    in.predicted_template = "";
    in.predicted_slots = std::vector<SlotAssignment>{};
  }
  in.predicted_labels = r.labels;
  try {
    GoldDerivation g = derive_gold(gold);
    in.reference_template = g.query_template.text();
    in.gold_slots = g.assignment;
    in.gold_labels = g.spans;
  } catch (const Error&) {
  }
  return in;
}

}  // namespace kgqa
