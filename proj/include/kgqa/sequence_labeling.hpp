#pragma once

// Sequence labelling: tags question phrases with the placeholder role they
// fill (obj1, subj1, str1, num1, ...). Two implementations: a lexicon
// baseline built from annotated training questions and a replay adapter for
// labels produced by an external tagger.

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgqa/error.hpp"
#include "kgqa/metrics.hpp"
#include "kgqa/query_template.hpp"
#include "kgqa/sparql.hpp"
#include "kgqa/text.hpp"

namespace kgqa {

struct Question {
  std::string id;
  std::string text;
};

struct LabeledSpan {
  Span span;
  std::string text;
  PlaceholderLabel label;

  friend bool operator==(const LabeledSpan&, const LabeledSpan&) = default;
  friend auto operator<=>(const LabeledSpan& a, const LabeledSpan& b) {
    return std::tie(a.span, a.label, a.text) <=> std::tie(b.span, b.label, b.text);
  }
};

inline void to_json(nlohmann::json& j, const LabeledSpan& s) {
  j = nlohmann::json{{"start", s.span.start},
                     {"end", s.span.end},
                     {"text", s.text},
                     {"label", s.label.name()}};
}

inline LabeledSpan make_labeled_span(std::string_view question, Span span,
                                     PlaceholderLabel label) {
  return {span, std::string(question.substr(span.start, span.length())), label};
}

class SequenceLabeller {
 public:
  virtual ~SequenceLabeller() = default;
  virtual std::vector<LabeledSpan> label(const Question& question) const = 0;
};

// Case-folded mention -> most frequent training label.
class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(std::map<std::string, PlaceholderLabel> entries)
      : entries_(std::move(entries)) {
    for (const auto& [k, v] : entries_) lengths_.insert(k.size());
  }

  const std::map<std::string, PlaceholderLabel>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  // Entry lengths, longest first.
  const std::set<std::size_t, std::greater<>>& lengths() const { return lengths_; }

  std::optional<PlaceholderLabel> find(std::string_view folded) const {
    auto it = entries_.find(std::string(folded));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  nlohmann::json to_json() const {
    nlohmann::json entries = nlohmann::json::object();
    for (const auto& [k, v] : entries_) entries[k] = v.name();
    return nlohmann::json{{"entries", entries}};
  }

  static Lexicon from_json(const nlohmann::json& j) {
    std::map<std::string, PlaceholderLabel> entries;
    if (!j.contains("entries") || !j["entries"].is_object())
      throw Error(ErrorCode::kSchemaError, "lexicon lacks an \"entries\" object");
    for (const auto& [k, v] : j["entries"].items())
      entries.emplace(k, PlaceholderLabel::parse_or_throw(v.get<std::string>()));
    return Lexicon(std::move(entries));
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
    out << to_json().dump(2) << '\n';
  }

  static Lexicon load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kSchemaError, path + ": " + e.what());
    }
  }

 private:
  std::map<std::string, PlaceholderLabel> entries_;
  std::set<std::size_t, std::greater<>> lengths_;
};

// Ties between equally frequent labels go to the lexicographically smallest
// serialization.
inline Lexicon build_baseline_lexicon(const std::vector<EntityAnnotation>& annotations) {
  if (annotations.empty())
    throw Error(ErrorCode::kEmptyTrainingSet, "no annotated mentions to build a lexicon from");
  std::map<std::string, std::map<std::string, int>> counts;
  for (const auto& a : annotations) {
    std::string key = text::casefold(text::trim(a.mention));
    if (key.empty()) continue;
    ++counts[key][a.role.name()];
  }
  std::map<std::string, PlaceholderLabel> entries;
  for (const auto& [mention, by_label] : counts) {
    const std::string* best = nullptr;
    int best_n = 0;
    for (const auto& [name, n] : by_label) {
      if (n > best_n) {  // ascending names: first maximum is the smallest
        best = &name;
        best_n = n;
      }
    }
    entries.emplace(mention, PlaceholderLabel::parse_or_throw(*best));
  }
  return Lexicon(std::move(entries));
}

namespace detail {

inline bool is_word_char(char c) {
  return text::is_ascii_alnum(c) || c == '_' || static_cast<unsigned char>(c) >= 0x80;
}

inline bool word_boundary_before(std::string_view s, std::size_t i) {
  return i == 0 || !is_word_char(s[i - 1]);
}

inline bool word_boundary_after(std::string_view s, std::size_t end) {
  return end >= s.size() || !is_word_char(s[end]);
}

}  // namespace detail

// Longest-match-first lexicon scan plus two rules: text between double
// quotes becomes strN, bare integers and decimals become numN, each kind
// numbered left to right. Overlapping lexicon hits are all kept.
class BaselineLabeller : public SequenceLabeller {
 public:
  explicit BaselineLabeller(Lexicon lexicon) : lexicon_(std::move(lexicon)) {}

  const Lexicon& lexicon() const { return lexicon_; }

  std::vector<LabeledSpan> label(const Question& question) const override {
    return label_text(question.text);
  }

  std::vector<LabeledSpan> label_text(std::string_view q) const {
    std::vector<LabeledSpan> out;
    std::string folded = text::casefold(q);

    std::vector<Span> quoted;
    for (std::size_t i = q.find('"'); i != std::string_view::npos;) {
      std::size_t close = q.find('"', i + 1);
      if (close == std::string_view::npos) break;
      if (close > i + 1) quoted.push_back({i + 1, close});
      i = q.find('"', close + 1);
    }
    int str_ordinal = 0;
    for (const Span& s : quoted)
      out.push_back(make_labeled_span(q, s, {PlaceholderKind::kStr, ++str_ordinal}));

    auto in_quotes = [&](std::size_t pos) {
      for (const Span& s : quoted)
        if (pos >= s.start && pos < s.end) return true;
      return false;
    };

    int num_ordinal = 0;
    for (std::size_t i = 0; i < q.size();) {
      if (!detail::is_digit(q[i]) || !detail::word_boundary_before(q, i) || in_quotes(i)) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < q.size() && detail::is_digit(q[j])) ++j;
      if (j + 1 < q.size() && q[j] == '.' && detail::is_digit(q[j + 1])) {
        j += 1;
        while (j < q.size() && detail::is_digit(q[j])) ++j;
      }
      if (detail::word_boundary_after(q, j)) {
        out.push_back(make_labeled_span(q, {i, j}, {PlaceholderKind::kNum, ++num_ordinal}));
      }
      i = j;
    }

    for (std::size_t i = 0; i < q.size(); ++i) {
      if (!detail::is_word_char(q[i]) || !detail::word_boundary_before(q, i)) continue;
      for (std::size_t len : lexicon_.lengths()) {
        if (i + len > q.size() || !detail::word_boundary_after(q, i + len)) continue;
        if (auto label = lexicon_.find(std::string_view(folded).substr(i, len)))
          out.push_back(make_labeled_span(q, {i, i + len}, *label));
      }
    }

    std::sort(out.begin(), out.end(), [](const LabeledSpan& a, const LabeledSpan& b) {
      if (a.span.start != b.span.start) return a.span.start < b.span.start;
      if (a.span.end != b.span.end) return a.span.end > b.span.end;
      return a.label < b.label;
    });
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  Lexicon lexicon_;
};

// Replays pre-computed labels, one JSON object per line:
//   { "question_id": string, "spans": [ { "start", "end", "label" } ] }
class ReplayLabeller : public SequenceLabeller {
 public:
  using Entry = std::vector<std::tuple<Span, PlaceholderLabel>>;

  explicit ReplayLabeller(std::map<std::string, Entry> entries)
      : entries_(std::move(entries)) {}

  static ReplayLabeller load(const std::string& path) {
    std::ifstream in(path);
    if (!in)
      throw Error(ErrorCode::kAdapterUnavailable, "cannot open label replay file " + path);
    std::map<std::string, Entry> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (text::trim(line).empty()) continue;
      try {
        auto j = nlohmann::json::parse(line);
        Entry spans;
        for (const auto& s : j.at("spans")) {
          spans.emplace_back(Span{s.at("start").get<std::size_t>(), s.at("end").get<std::size_t>()},
                             PlaceholderLabel::parse_or_throw(s.at("label").get<std::string>()));
        }
        entries[j.at("question_id").get<std::string>()] = std::move(spans);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kSchemaError,
                    path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    return ReplayLabeller(std::move(entries));
  }

  std::vector<LabeledSpan> label(const Question& question) const override {
    auto it = entries_.find(question.id);
    if (it == entries_.end()) {
      throw Error(ErrorCode::kAdapterUnavailable,
                  "no replayed labels for question '" + question.id + "'");
    }
    std::vector<LabeledSpan> out;
    for (const auto& [span, label] : it->second) {
      if (span.end < span.start || !span.within(question.text)) continue;
      out.push_back(make_labeled_span(question.text, span, label));
    }
    return out;
  }

 private:
  std::map<std::string, Entry> entries_;
};

// A predicted span is correct when both its interval and its label equal a
// gold span of the same question.
inline MicroMacro evaluate_labels(const std::vector<std::vector<LabeledSpan>>& predicted,
                                  const std::vector<std::vector<LabeledSpan>>& gold) {
  if (predicted.size() != gold.size())
    throw Error(ErrorCode::kLengthMismatch, "predicted and gold question counts differ");
  PrfAccumulator acc;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::set<std::pair<Span, PlaceholderLabel>> p, g;
    for (const auto& s : predicted[i]) p.emplace(s.span, s.label);
    for (const auto& s : gold[i]) g.emplace(s.span, s.label);
    acc.add_sets(p, g);
  }
  return acc.result();
}

}  // namespace kgqa
