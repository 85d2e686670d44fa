#pragma once

// Question -> ranked query templates. The retrieval baseline returns the
// templates of the most similar training questions; the replay adapter
// serves templates generated offline by an external translation model.

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgqa/error.hpp"
#include "kgqa/query_template.hpp"
#include "kgqa/sequence_labeling.hpp"
#include "kgqa/text.hpp"

namespace kgqa {

enum class TemplateSource { kRetrieval, kExternal };

struct TemplateCandidate {
  QueryTemplate query_template;
  double score = 0.0;
  TemplateSource source = TemplateSource::kRetrieval;
};

inline void to_json(nlohmann::json& j, const TemplateCandidate& c) {
  j = nlohmann::json{{"template", c.query_template.text()},
                     {"score", c.score},
                     {"source", c.source == TemplateSource::kRetrieval ? "retrieval" : "external"}};
}

inline constexpr std::size_t kDefaultTemplateCandidates = 5;

class Translator {
 public:
  virtual ~Translator() = default;
  // At most k candidates, best first. `labels` lets implementations mask
  // entity mentions; implementations that do not need them ignore them.
  virtual std::vector<TemplateCandidate> translate(
      const Question& question, std::size_t k,
      const std::vector<LabeledSpan>& labels = {}) const = 0;
};

// Question words with each labelled phrase replaced by its label name.
// Overlapping labels keep the earliest, longest span.
inline std::vector<std::string> masked_words(std::string_view question,
                                             const std::vector<LabeledSpan>& labels) {
  std::vector<LabeledSpan> chosen;
  std::vector<LabeledSpan> sorted = labels;
  std::sort(sorted.begin(), sorted.end(), [](const LabeledSpan& a, const LabeledSpan& b) {
    if (a.span.start != b.span.start) return a.span.start < b.span.start;
    if (a.span.end != b.span.end) return a.span.end > b.span.end;
    return a.label < b.label;
  });
  std::size_t covered = 0;
  for (const auto& s : sorted) {
    if (s.span.start < covered || !s.span.within(question) || s.span.empty()) continue;
    chosen.push_back(s);
    covered = s.span.end;
  }
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (const auto& s : chosen) {
    for (auto& w : text::words(question.substr(pos, s.span.start - pos))) out.push_back(std::move(w));
    out.push_back(s.label.name());
    pos = s.span.end;
  }
  for (auto& w : text::words(question.substr(pos))) out.push_back(std::move(w));
  return out;
}

struct TrainingPair {
  std::string question;
  std::vector<LabeledSpan> mentions;  // gold labelled mentions, masked out
  QueryTemplate query_template;
};

// Nearest-neighbour template retrieval by multiset Jaccard over masked
// question words. Equal scores order by normalized template text.
class RetrievalTranslator : public Translator {
 public:
  struct Entry {
    text::Multiset words;
    QueryTemplate query_template;
    std::string normalized;
  };

  static RetrievalTranslator build(const std::vector<TrainingPair>& pairs) {
    if (pairs.empty()) throw Error(ErrorCode::kEmptyTrainingSet, "no training pairs to index");
    RetrievalTranslator index;
    for (const auto& p : pairs) {
      if (!p.query_template.has_contiguous_ordinals()) continue;
      index.add(text::multiset_of(masked_words(p.question, p.mentions)), p.query_template);
    }
    if (index.entries_.empty()) throw Error(ErrorCode::kEmptyTrainingSet, "no usable training pairs");
    return index;
  }

  std::size_t size() const { return entries_.size(); }

  std::vector<TemplateCandidate> translate(const Question& question, std::size_t k,
                                           const std::vector<LabeledSpan>& labels = {}) const override {
    if (k == 0) throw Error(ErrorCode::kConfigError, "k must be at least 1");
    if (entries_.empty()) throw Error(ErrorCode::kNoCandidate, "empty retrieval index");
    text::Multiset words = text::multiset_of(masked_words(question.text, labels));
    std::map<std::string, std::pair<double, const Entry*>> best;
    for (const auto& e : entries_) {
      double s = text::multiset_jaccard(words, e.words);
      auto [it, fresh] = best.try_emplace(e.normalized, s, &e);
      if (!fresh && s > it->second.first) it->second = {s, &e};
    }
    std::vector<std::pair<double, const Entry*>> ranked;
    for (const auto& [norm, v] : best) ranked.push_back(v);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<TemplateCandidate> out;
    for (std::size_t i = 0; i < ranked.size() && i < k; ++i) {
      out.push_back({ranked[i].second->query_template, ranked[i].first, TemplateSource::kRetrieval});
    }
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : entries_) {
      std::vector<std::string> words;
      for (const auto& [w, n] : e.words)
        for (int i = 0; i < n; ++i) words.push_back(w);
      entries.push_back({{"words", words}, {"template", e.normalized}});
    }
    return nlohmann::json{{"entries", entries}};
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
    out << to_json().dump(1) << '\n';
  }

  static RetrievalTranslator load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
    RetrievalTranslator index;
    try {
      auto j = nlohmann::json::parse(in);
      for (const auto& e : j.at("entries")) {
        index.add(text::multiset_of(e.at("words").get<std::vector<std::string>>()),
                  QueryTemplate::parse(e.at("template").get<std::string>()));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kSchemaError, path + ": " + e.what());
    }
    if (index.entries_.empty()) throw Error(ErrorCode::kEmptyTrainingSet, path + ": empty index");
    return index;
  }

 private:
  void add(text::Multiset words, QueryTemplate tmpl) {
    std::string normalized = tmpl.text();
    entries_.push_back({std::move(words), std::move(tmpl), std::move(normalized)});
  }

  std::vector<Entry> entries_;
};

// Serves templates recorded from an external model, one JSON object per
// line: { "question_id": string, "templates": [string, ...] }.
class ReplayTranslator : public Translator {
 public:
  explicit ReplayTranslator(std::map<std::string, std::vector<std::string>> entries,
                            std::ostream* warnings = nullptr)
      : entries_(std::move(entries)), warnings_(warnings) {}

  static ReplayTranslator load(const std::string& path, std::ostream* warnings = nullptr) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open template replay file " + path);
    std::map<std::string, std::vector<std::string>> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (text::trim(line).empty()) continue;
      try {
        auto j = nlohmann::json::parse(line);
        entries[j.at("question_id").get<std::string>()] =
            j.at("templates").get<std::vector<std::string>>();
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kSchemaError, path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    return ReplayTranslator(std::move(entries), warnings);
  }

  // Candidates that fail to tokenize are dropped and the rest move up.
  std::vector<TemplateCandidate> translate(const Question& question, std::size_t k,
                                           const std::vector<LabeledSpan>& = {}) const override {
    if (k == 0) throw Error(ErrorCode::kConfigError, "k must be at least 1");
    auto it = entries_.find(question.id);
    if (it == entries_.end())
      throw Error(ErrorCode::kMissingEntry, "no replayed templates for question '" + question.id + "'");
    std::vector<TemplateCandidate> out;
    for (std::size_t i = 0; i < it->second.size() && out.size() < k; ++i) {
      try {
        QueryTemplate t = QueryTemplate::parse(it->second[i]);
        if (!t.has_contiguous_ordinals())
          throw Error(ErrorCode::kMalformedTemplate, "placeholder ordinals are not 1..n in order");
        out.push_back({std::move(t), 1.0 / static_cast<double>(i + 1), TemplateSource::kExternal});
      } catch (const Error& e) {
        if (warnings_) {
          *warnings_ << nlohmann::json{{"question_id", question.id},
                                       {"dropped_template", i},
                                       {"error", std::string(error_code_name(ErrorCode::kMalformedTemplate))},
                                       {"detail", e.what()}}
                            .dump()
                     << '\n';
        }
      }
    }
    if (out.empty())
      throw Error(ErrorCode::kNoCandidate, "no usable template for question '" + question.id + "'");
    return out;
  }

 private:
  std::map<std::string, std::vector<std::string>> entries_;
  std::ostream* warnings_;
};

}  // namespace kgqa
