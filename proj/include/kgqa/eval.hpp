#pragma once

// Evaluation: corpus BLEU over SPARQL tokens, exact-match accuracy, answer
// precision/recall/F1, the template/entity/slot error taxonomy, and the
// corpus report combining them.

#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgqa/answer_set.hpp"
#include "kgqa/error.hpp"
#include "kgqa/kb_client.hpp"
#include "kgqa/metrics.hpp"
#include "kgqa/query_template.hpp"
#include "kgqa/sequence_labeling.hpp"
#include "kgqa/slot_filling.hpp"
#include "kgqa/sparql.hpp"

namespace kgqa {

using TokenSequence = std::vector<std::string>;

// Tokens used for BLEU: SPARQL tokens with keywords upper-cased. Output
// that does not lex falls back to whitespace splitting.
inline TokenSequence bleu_tokens(std::string_view query) {
  TokenSequence out;
  try {
    for (const auto& t : tokenize(query))
      out.push_back(t.kind == TokenKind::kKeyword ? normalize_keyword(t.text) : t.text);
  } catch (const Error&) {
    std::istringstream in{std::string(query)};
    for (std::string w; in >> w;) out.push_back(w);
  }
  return out;
}

// Corpus-level BLEU-4 without smoothing: clipped n-gram precisions pooled
// over the corpus, geometric mean, brevity penalty exp(1 - r/c) when c < r.
inline double bleu(const std::vector<TokenSequence>& candidates,
                   const std::vector<TokenSequence>& references) {
  if (candidates.size() != references.size())
    throw Error(ErrorCode::kLengthMismatch, "candidate and reference counts differ");
  constexpr std::size_t kMaxN = 4;
  std::array<std::size_t, kMaxN> matched{};
  std::array<std::size_t, kMaxN> total{};
  std::size_t cand_len = 0;
  std::size_t ref_len = 0;

  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    const auto& r = references[i];
    cand_len += c.size();
    ref_len += r.size();
    for (std::size_t n = 1; n <= kMaxN; ++n) {
      if (c.size() < n) continue;
      std::map<TokenSequence, std::size_t> ref_counts;
      for (std::size_t j = 0; j + n <= r.size(); ++j)
        ++ref_counts[TokenSequence(r.begin() + j, r.begin() + j + n)];
      std::map<TokenSequence, std::size_t> cand_counts;
      for (std::size_t j = 0; j + n <= c.size(); ++j)
        ++cand_counts[TokenSequence(c.begin() + j, c.begin() + j + n)];
      for (const auto& [gram, count] : cand_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matched[n - 1] += std::min(count, it->second);
      }
      total[n - 1] += c.size() - n + 1;
    }
  }
  if (cand_len == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < kMaxN; ++n) {
    if (matched[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched[n]) / static_cast<double>(total[n]));
  }
  double bp = cand_len < ref_len
                  ? std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len))
                  : 1.0;
  return bp * std::exp(log_sum / static_cast<double>(kMaxN));
}

// Syntactic equality after normalization; queries that do not lex never match.
inline bool exact_match(std::string_view predicted, std::string_view reference) {
  try {
    return normalize(predicted) == normalize(reference);
  } catch (const Error&) {
    return false;
  }
}

inline double accuracy(const std::vector<std::string>& predicted, const std::vector<std::string>& reference) {
  if (predicted.size() != reference.size())
    throw Error(ErrorCode::kLengthMismatch, "predicted and reference counts differ");
  if (predicted.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += exact_match(predicted[i], reference[i]);
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

inline Prf answer_prf(const AnswerSet& predicted, const AnswerSet& reference) {
  static constexpr Prf kZero{0.0, 0.0, 0.0};
  static constexpr Prf kPerfect{1.0, 1.0, 1.0};
  if (predicted.is_error() || predicted.kind != reference.kind) return kZero;
  if (predicted.kind == AnswerKind::kBoolean) return *predicted.boolean == *reference.boolean ? kPerfect : kZero;
  const auto& p = *predicted.rows;
  const auto& r = *reference.rows;
  if (p.empty() && r.empty()) return kPerfect;
  std::size_t common = 0;
  for (const auto& row : p) common += r.contains(row);
  return prf_from_counts(common, p.size(), r.size());
}

enum class ErrorClass { kTES, kTEx, kTxx, kxES, kxEx, kxxx };

inline constexpr std::array<ErrorClass, 6> kAllErrorClasses = {
    ErrorClass::kTES, ErrorClass::kTEx, ErrorClass::kTxx,
    ErrorClass::kxES, ErrorClass::kxEx, ErrorClass::kxxx};

inline std::string_view error_class_name(ErrorClass c) {
  switch (c) {
    case ErrorClass::kTES: return "TES";
    case ErrorClass::kTEx: return "TE!";
    case ErrorClass::kTxx: return "T!!";
    case ErrorClass::kxES: return "!ES";
    case ErrorClass::kxEx: return "!E!";
    case ErrorClass::kxxx: return "!!!";
  }
  return "";
}

// Wrong entities imply wrong slots, so (T?, !E, S) cannot occur.
inline ErrorClass classify_error(bool template_ok, bool entities_ok, bool slots_ok) {
  if (!entities_ok && slots_ok)
    throw Error(ErrorCode::kInvalidCombination, "correct slots require correct entities");
  if (template_ok) {
    if (!entities_ok) return ErrorClass::kTxx;
    return slots_ok ? ErrorClass::kTES : ErrorClass::kTEx;
  }
  if (!entities_ok) return ErrorClass::kxxx;
  return slots_ok ? ErrorClass::kxES : ErrorClass::kxEx;
}

// Wikidata entities of a query in token order (Q-ids).
inline std::vector<std::string> entity_sequence(std::string_view query) {
  std::vector<std::string> out;
  try {
    for (const auto& t : tokenize(query)) {
      if (t.kind != TokenKind::kIri && t.kind != TokenKind::kPrefixedName) continue;
      if (auto q = wikidata_qid(t.text)) out.push_back(*q);
    }
  } catch (const Error&) {
  }
  return out;
}

// The query's shape with every entity reference and placeholder replaced by
// one generic marker; nullopt if the query does not lex.
inline std::optional<std::string> query_shape(std::string_view query) {
  try {
    std::vector<QueryToken> tokens = tokenize(query);
    for (auto& t : tokens) {
      bool entity = (t.kind == TokenKind::kIri || t.kind == TokenKind::kPrefixedName) &&
                    wikidata_qid(t.text).has_value();
      if (entity || t.kind == TokenKind::kPlaceholder) t = {TokenKind::kIri, "<ent>", std::nullopt};
    }
    return join_tokens(tokens);
  } catch (const Error&) {
    return std::nullopt;
  }
}

struct ComponentFlags {
  bool template_ok = false;
  bool entities_ok = false;
  bool slots_ok = false;
};

// T: same query shape once entities are abstracted. E: same multiset of
// entities. S: same entities in the same positions.
inline ComponentFlags component_flags(std::string_view predicted, std::string_view reference) {
  ComponentFlags f;
  auto ps = query_shape(predicted);
  auto rs = query_shape(reference);
  f.template_ok = ps && rs && *ps == *rs;
  auto pe = entity_sequence(predicted);
  auto re = entity_sequence(reference);
  f.slots_ok = ps.has_value() && pe == re;
  std::sort(pe.begin(), pe.end());
  std::sort(re.begin(), re.end());
  f.entities_ok = ps.has_value() && pe == re;
  return f;
}

// One question's system output and gold data. Template, slot and label
// fields are optional; the matching report sections appear only when every
// input carries them.
struct EvalInput {
  std::string question_id;
  std::string predicted_query;
  bool predicted_complete = true;
  std::string reference_query;
  std::optional<std::string> predicted_template;
  std::optional<std::string> reference_template;
  std::optional<std::vector<SlotAssignment>> predicted_slots;
  std::optional<SlotValues> gold_slots;
  std::optional<std::vector<LabeledSpan>> predicted_labels;
  std::optional<std::vector<LabeledSpan>> gold_labels;
};

struct EvalRecord {
  std::string question_id;
  std::string predicted_query;
  std::string reference_query;
  bool exact_match = false;
  double answer_p = 0.0;
  double answer_r = 0.0;
  double answer_f1 = 0.0;
  bool both_empty = false;
  ErrorClass error_class = ErrorClass::kxxx;
  AnswerSet predicted_answer;
  AnswerSet reference_answer;
};

struct EvalReport {
  std::size_t questions = 0;
  double bleu = 0.0;
  double accuracy = 0.0;
  double macro_p = 0.0;
  double macro_r = 0.0;
  double macro_f1 = 0.0;
  std::size_t both_empty_answers = 0;
  std::map<ErrorClass, double> error_class_histogram;
  std::optional<double> template_bleu;
  std::optional<double> template_accuracy;
  std::optional<MicroMacro> slot_pairs;
  std::optional<MicroMacro> labels;
  std::vector<EvalRecord> per_question;
};

inline nlohmann::json prf_json(const Prf& p) {
  return nlohmann::json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

inline nlohmann::json micro_macro_json(const MicroMacro& m) {
  return nlohmann::json{{"micro", prf_json(m.micro)}, {"macro", prf_json(m.macro)}};
}

inline void to_json(nlohmann::json& j, const EvalRecord& r) {
  j = nlohmann::json{{"question_id", r.question_id},
                     {"predicted_query", r.predicted_query},
                     {"reference_query", r.reference_query},
                     {"exact_match", r.exact_match},
                     {"answer_p", r.answer_p},
                     {"answer_r", r.answer_r},
                     {"answer_f1", r.answer_f1},
                     {"both_empty", r.both_empty},
                     {"error_class", error_class_name(r.error_class)},
                     {"predicted_answer", r.predicted_answer},
                     {"reference_answer", r.reference_answer}};
}

inline void to_json(nlohmann::json& j, const EvalReport& r) {
  nlohmann::json hist = nlohmann::json::object();
  for (ErrorClass c : kAllErrorClasses) {
    auto it = r.error_class_histogram.find(c);
    hist[std::string(error_class_name(c))] = it == r.error_class_histogram.end() ? 0.0 : it->second;
  }
  j = nlohmann::json{{"questions", r.questions},
                     {"bleu", r.bleu},
                     {"accuracy", r.accuracy},
                     {"macro_precision", r.macro_p},
                     {"macro_recall", r.macro_r},
                     {"macro_f1", r.macro_f1},
                     {"both_empty_answers", r.both_empty_answers},
                     {"error_classes", hist},
                     {"per_question", r.per_question}};
  if (r.template_bleu) j["template_bleu"] = *r.template_bleu;
  if (r.template_accuracy) j["template_accuracy"] = *r.template_accuracy;
  if (r.slot_pairs) j["slot_pairs"] = micro_macro_json(*r.slot_pairs);
  if (r.labels) j["sequence_labels"] = micro_macro_json(*r.labels);
}

// Fixed-layout summary: one header line and one row of percentages.
inline std::string format_report_table(const EvalReport& r, std::string_view system = "system") {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-24s %7s %7s %7s %7s %7s\n", "System", "B", "A", "P", "R", "F1");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-24.24s %6.1f%% %6.1f%% %6.1f%% %6.1f%% %6.1f%%\n",
                std::string(system).c_str(), 100 * r.bleu, 100 * r.accuracy, 100 * r.macro_p,
                100 * r.macro_r, 100 * r.macro_f1);
  out += buf;
  out += "\n";
  std::string classes;
  std::string values;
  for (ErrorClass c : kAllErrorClasses) {
    std::snprintf(buf, sizeof buf, "%7s ", std::string(error_class_name(c)).c_str());
    classes += buf;
    auto it = r.error_class_histogram.find(c);
    std::snprintf(buf, sizeof buf, "%6.1f%% ", 100 * (it == r.error_class_histogram.end() ? 0.0 : it->second));
    values += buf;
  }
  out += classes + "\n" + values + "\n";
  return out;
}

inline EvalReport evaluate_corpus(const std::vector<EvalInput>& inputs, KbClient& client) {
  EvalReport report;
  report.questions = inputs.size();
  for (ErrorClass c : kAllErrorClasses) report.error_class_histogram[c] = 0.0;
  if (inputs.empty()) return report;

  std::vector<TokenSequence> cand, ref, tcand, tref;
  bool have_templates = true;
  bool have_slots = true;
  bool have_labels = true;
  std::vector<std::vector<SlotAssignment>> pslots;
  std::vector<SlotValues> gslots;
  std::vector<std::vector<LabeledSpan>> plabels, glabels;
  std::size_t exact = 0;
  std::size_t template_exact = 0;
  double sum_p = 0, sum_r = 0, sum_f = 0;

  for (const auto& in : inputs) {
    EvalRecord rec;
    rec.question_id = in.question_id;
    rec.predicted_query = in.predicted_query;
    rec.reference_query = in.reference_query;
    rec.exact_match = in.predicted_complete && exact_match(in.predicted_query, in.reference_query);
    exact += rec.exact_match;

    rec.reference_answer = client.execute(in.reference_query);
    rec.predicted_answer = in.predicted_complete ? client.execute(in.predicted_query)
                                                 : AnswerSet::of_error("incomplete query");
    Prf prf = answer_prf(rec.predicted_answer, rec.reference_answer);
    rec.answer_p = prf.precision;
    rec.answer_r = prf.recall;
    rec.answer_f1 = prf.f1;
    rec.both_empty = rec.predicted_answer.kind == AnswerKind::kBindings &&
                     rec.reference_answer.kind == AnswerKind::kBindings &&
                     rec.predicted_answer.rows->empty() && rec.reference_answer.rows->empty();
    report.both_empty_answers += rec.both_empty;
    sum_p += prf.precision;
    sum_r += prf.recall;
    sum_f += prf.f1;

    ComponentFlags f = component_flags(in.predicted_query, in.reference_query);
    rec.error_class = classify_error(f.template_ok, f.entities_ok, f.slots_ok);
    report.error_class_histogram[rec.error_class] += 1.0;

    cand.push_back(bleu_tokens(in.predicted_query));
    ref.push_back(bleu_tokens(in.reference_query));

    have_templates &= in.predicted_template.has_value() && in.reference_template.has_value();
    if (have_templates) {
      tcand.push_back(bleu_tokens(*in.predicted_template));
      tref.push_back(bleu_tokens(*in.reference_template));
      template_exact += exact_match(*in.predicted_template, *in.reference_template);
    }
    have_slots &= in.predicted_slots.has_value() && in.gold_slots.has_value();
    if (have_slots) {
      pslots.push_back(*in.predicted_slots);
      gslots.push_back(*in.gold_slots);
    }
    have_labels &= in.predicted_labels.has_value() && in.gold_labels.has_value();
    if (have_labels) {
      plabels.push_back(*in.predicted_labels);
      glabels.push_back(*in.gold_labels);
    }
    report.per_question.push_back(std::move(rec));
  }

  double n = static_cast<double>(inputs.size());
  report.bleu = bleu(cand, ref);
  report.accuracy = static_cast<double>(exact) / n;
  report.macro_p = sum_p / n;
  report.macro_r = sum_r / n;
  report.macro_f1 = sum_f / n;
  for (auto& [c, v] : report.error_class_histogram) v /= n;
  if (have_templates) {
    report.template_bleu = bleu(tcand, tref);
    report.template_accuracy = static_cast<double>(template_exact) / n;
  }
  if (have_slots) report.slot_pairs = evaluate_slot_pairs(pslots, gslots);
  if (have_labels) report.labels = evaluate_labels(plabels, glabels);
  return report;
}

}  // namespace kgqa
