#pragma once

// Question-query datasets: JSONL storage, the five quality heuristics used
// to clean crowd-sourced pairs, LC-QuAD 2.0 ingestion and derivation of the
// gold artifacts (template, slot assignment, labelled spans) of each pair.

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgqa/error.hpp"
#include "kgqa/query_template.hpp"
#include "kgqa/sequence_labeling.hpp"
#include "kgqa/sparql.hpp"
#include "kgqa/text.hpp"
#include "kgqa/translator.hpp"

namespace kgqa {

enum class Split { kTrain, kTest };

struct QAInstance {
  std::string id;
  std::string question;  // a null question is stored as empty text
  std::optional<std::string> synthetic_question;
  std::string query;
  std::vector<EntityAnnotation> annotations;
  Split split = Split::kTrain;
  // Labels of the gold answer entities, when known.
  std::vector<std::string> answer_labels;

  friend bool operator==(const QAInstance&, const QAInstance&) = default;
};

inline void to_json(nlohmann::json& j, const EntityAnnotation& a) {
  j = nlohmann::json{{"mention", a.mention},
                     {"start", a.span.start},
                     {"end", a.span.end},
                     {"kb_id", a.kb_id},
                     {"role", a.role.name()}};
}

inline void from_json(const nlohmann::json& j, EntityAnnotation& a) {
  a.mention = j.at("mention").get<std::string>();
  a.span = {j.at("start").get<std::size_t>(), j.at("end").get<std::size_t>()};
  a.kb_id = j.at("kb_id").get<std::string>();
  a.role = PlaceholderLabel::parse_or_throw(j.at("role").get<std::string>());
}

inline void to_json(nlohmann::json& j, const QAInstance& q) {
  j = nlohmann::json{{"id", q.id},
                     {"question", q.question},
                     {"query", q.query},
                     {"annotations", q.annotations},
                     {"split", q.split == Split::kTrain ? "train" : "test"}};
  if (q.synthetic_question) j["synthetic_question"] = *q.synthetic_question;
  if (!q.answer_labels.empty()) j["answer_labels"] = q.answer_labels;
}

inline void from_json(const nlohmann::json& j, QAInstance& q) {
  if (!j.is_object()) throw Error(ErrorCode::kSchemaError, "instance is not a JSON object");
  for (const char* field : {"id", "query"}) {
    if (!j.contains(field) || !j[field].is_string())
      throw Error(ErrorCode::kSchemaError, std::string("missing string field \"") + field + "\"");
  }
  q.id = j["id"].get<std::string>();
  q.query = j["query"].get<std::string>();
  q.question = j.contains("question") && j["question"].is_string() ? j["question"].get<std::string>() : "";
  q.synthetic_question.reset();
  if (j.contains("synthetic_question") && j["synthetic_question"].is_string())
    q.synthetic_question = j["synthetic_question"].get<std::string>();
  q.annotations.clear();
  if (j.contains("annotations")) {
    try {
      q.annotations = j["annotations"].get<std::vector<EntityAnnotation>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kSchemaError, std::string("bad annotation: ") + e.what());
    }
  }
  std::string split = j.value("split", "train");
  if (split == "train") {
    q.split = Split::kTrain;
  } else if (split == "test") {
    q.split = Split::kTest;
  } else {
    throw Error(ErrorCode::kSchemaError, "split must be \"train\" or \"test\"");
  }
  q.answer_labels.clear();
  if (j.contains("answer_labels")) q.answer_labels = j["answer_labels"].get<std::vector<std::string>>();
}

struct LoadIssue {
  std::size_t line = 0;
  std::string message;
};

struct LoadResult {
  std::vector<QAInstance> instances;
  std::vector<LoadIssue> issues;  // malformed lines, skipped
};

inline LoadResult load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open dataset " + path);
  LoadResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      result.instances.push_back(nlohmann::json::parse(line).get<QAInstance>());
    } catch (const Error& e) {
      result.issues.push_back({lineno, e.what()});
    } catch (const nlohmann::json::exception& e) {
      result.issues.push_back({lineno, std::string(error_code_name(ErrorCode::kSchemaError)) + ": " + e.what()});
    }
  }
  return result;
}

// Queries are written on one line each; embedded newlines become spaces.
inline void save_dataset(const std::string& path, const std::vector<QAInstance>& instances) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  for (QAInstance q : instances) {
    for (char& c : q.query)
      if (c == '\n' || c == '\r') c = ' ';
    out << nlohmann::json(q).dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path);
}

enum class CleaningReason { kNullText, kSyntheticLeak, kAnswerInQuestion, kBadLength, kInvalidTokens };

inline std::string_view cleaning_reason_name(CleaningReason r) {
  switch (r) {
    case CleaningReason::kNullText: return "NULL_TEXT";
    case CleaningReason::kSyntheticLeak: return "SYNTHETIC_LEAK";
    case CleaningReason::kAnswerInQuestion: return "ANSWER_IN_QUESTION";
    case CleaningReason::kBadLength: return "BAD_LENGTH";
    case CleaningReason::kInvalidTokens: return "INVALID_TOKENS";
  }
  return "";
}

struct CleaningVerdict {
  bool keep = true;
  std::set<CleaningReason> reasons;
};

// Length bounds are in characters (code points).
struct CleaningConfig {
  std::size_t min_chars = 10;
  std::size_t max_chars = 350;
  double min_synthetic_ratio = 0.5;
  double max_synthetic_ratio = 3.0;
};

inline CleaningVerdict clean(const QAInstance& inst, const CleaningConfig& config = {}) {
  CleaningVerdict v;
  std::string_view question = text::trim(inst.question);

  if (question.empty() || text::casefold(question) == "na") {
    v.reasons.insert(CleaningReason::kNullText);
  } else {
    if (question.find_first_of("[]{}") != std::string_view::npos ||
        (inst.synthetic_question &&
         text::casefold(question) == text::casefold(text::trim(*inst.synthetic_question)))) {
      v.reasons.insert(CleaningReason::kSyntheticLeak);
    }

    if (!inst.answer_labels.empty()) {
      text::Multiset q = text::multiset_of(text::words(question));
      bool all_present = true;
      for (const auto& label : inst.answer_labels) {
        auto words = text::words(label);
        if (words.empty() || !text::multiset_contains(q, text::multiset_of(words))) {
          all_present = false;
          break;
        }
      }
      if (all_present) v.reasons.insert(CleaningReason::kAnswerInQuestion);
    }

    std::size_t len = text::utf8_length(question);
    bool bad_length = len < config.min_chars || len > config.max_chars;
    if (inst.synthetic_question) {
      std::size_t syn = text::utf8_length(text::trim(*inst.synthetic_question));
      if (syn > 0) {
        double r = static_cast<double>(len) / static_cast<double>(syn);
        bad_length |= r < config.min_synthetic_ratio || r > config.max_synthetic_ratio;
      }
    }
    if (bad_length) v.reasons.insert(CleaningReason::kBadLength);
  }

  try {
    for (const auto& tok : tokenize(inst.query)) {
      if (tok.kind == TokenKind::kKeyword && !is_known_keyword(tok.text)) {
        v.reasons.insert(CleaningReason::kInvalidTokens);
        break;
      }
    }
  } catch (const Error&) {
    v.reasons.insert(CleaningReason::kInvalidTokens);
  }

  v.keep = v.reasons.empty();
  return v;
}

struct GoldDerivation {
  QueryTemplate query_template;
  SlotValues assignment;
  std::vector<LabeledSpan> spans;
};

inline GoldDerivation derive_gold(const QAInstance& inst) {
  for (const auto& a : inst.annotations) {
    if (!a.consistent_with(inst.question)) {
      throw Error(ErrorCode::kSchemaError,
                  inst.id + ": annotation '" + a.mention + "' does not match the question text");
    }
  }
  Templatized t = templatize(inst.query, inst.annotations);
  GoldDerivation g{std::move(t.query_template), std::move(t.assignment), {}};
  for (const auto& a : inst.annotations) g.spans.push_back({a.span, a.mention, a.role});
  std::sort(g.spans.begin(), g.spans.end());
  g.spans.erase(std::unique(g.spans.begin(), g.spans.end()), g.spans.end());
  return g;
}

// Training pairs for the retrieval index; instances whose gold derivation
// fails are skipped and reported through `skipped`.
inline std::vector<TrainingPair> training_pairs(const std::vector<QAInstance>& instances,
                                                std::vector<std::string>* skipped = nullptr) {
  std::vector<TrainingPair> out;
  for (const auto& inst : instances) {
    try {
      GoldDerivation g = derive_gold(inst);
      if (!g.query_template.has_contiguous_ordinals()) {
        if (skipped) skipped->push_back(inst.id + ": placeholder ordinals are not 1..n in query order");
        continue;
      }
      out.push_back({inst.question, g.spans, std::move(g.query_template)});
    } catch (const Error& e) {
      if (skipped) skipped->push_back(inst.id + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<EntityAnnotation> all_annotations(const std::vector<QAInstance>& instances) {
  std::vector<EntityAnnotation> out;
  for (const auto& inst : instances)
    for (const auto& a : inst.annotations)
      if (a.consistent_with(inst.question)) out.push_back(a);
  return out;
}

// Raw LC-QuAD 2.0 JSON (an array of records with uid, question,
// NNQT_question and sparql_wikidata) into the dataset schema. Entity
// mentions are annotated where `labels` (Q-id -> English label) gives a
// label that occurs in the question; roles come from the query.
inline std::vector<QAInstance> convert_lcquad(const nlohmann::json& raw, Split split,
                                              const std::map<std::string, std::string>& labels = {}) {
  if (!raw.is_array()) throw Error(ErrorCode::kSchemaError, "LC-QuAD export must be a JSON array");
  std::vector<QAInstance> out;
  for (const auto& rec : raw) {
    QAInstance q;
    const auto& uid = rec.at("uid");
    q.id = uid.is_string() ? uid.get<std::string>() : uid.dump();
    if (rec.contains("question") && rec["question"].is_string()) q.question = rec["question"].get<std::string>();
    if (rec.contains("NNQT_question") && rec["NNQT_question"].is_string())
      q.synthetic_question = rec["NNQT_question"].get<std::string>();
    q.query = rec.value("sparql_wikidata", "");
    q.split = split;
    std::vector<InferredRole> roles;
    try {
      roles = infer_roles(q.query);
    } catch (const Error&) {
      // left for clean() to flag
    }
    std::string folded = text::casefold(q.question);
    for (const auto& r : roles) {
      auto it = labels.find(r.qid);
      if (it == labels.end() || it->second.empty()) continue;
      auto pos = folded.find(text::casefold(it->second));
      if (pos == std::string::npos) continue;
      Span span{pos, pos + it->second.size()};
      q.annotations.push_back({q.question.substr(pos, it->second.size()), span, r.reference, r.role});
    }
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace kgqa
