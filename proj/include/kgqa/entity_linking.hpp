#pragma once

// Ensemble entity linking: candidates from several linkers are mapped to
// Wikidata and combined by per-mention voting into one ranked entity list.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "kgqa/error.hpp"
#include "kgqa/sparql.hpp"
#include "kgqa/text.hpp"

namespace kgqa {

enum class TargetKb { kWikidata, kDbpedia, kWikipedia, kYago };

inline std::string_view target_kb_name(TargetKb kb) {
  switch (kb) {
    case TargetKb::kWikidata: return "wikidata";
    case TargetKb::kDbpedia: return "dbpedia";
    case TargetKb::kWikipedia: return "wikipedia";
    case TargetKb::kYago: return "yago";
  }
  return "";
}

inline std::optional<TargetKb> parse_target_kb(std::string_view s) {
  std::string k = text::casefold(text::trim(s));
  if (k == "wikidata") return TargetKb::kWikidata;
  if (k == "dbpedia") return TargetKb::kDbpedia;
  if (k == "wikipedia") return TargetKb::kWikipedia;
  if (k == "yago") return TargetKb::kYago;
  return std::nullopt;
}

struct ElSystemConfig {
  std::string system_id;
  std::string endpoint;  // http(s) URL or fixture file path
  TargetKb target_kb = TargetKb::kWikidata;
  double precision_weight = 0.0;
  std::chrono::milliseconds timeout{5000};
};

struct EntityCandidate {
  std::string mention;
  Span span;
  std::string kb_id;
  TargetKb kb = TargetKb::kWikidata;
  double score = 0.0;
  std::string system_id;

  friend bool operator==(const EntityCandidate&,
                         const EntityCandidate&) = default;
};

struct RankedEntity {
  std::string mention;
  Span span;
  std::string wikidata_id;  // bare Q-id
  int votes = 0;
  int rank = 0;
  double weight_sum = 0.0;
  double score = 0.0;
  std::vector<std::string> systems;  // sorted ids of the voting systems

  friend bool operator==(const RankedEntity&, const RankedEntity&) = default;
};

using RankedEntityList = std::vector<RankedEntity>;

// Output of one linker for one question.
struct SystemCandidates {
  std::string system_id;
  std::vector<EntityCandidate> candidates;
};

// Local name of a DBpedia/Wikipedia/YAGO reference: `db:Marie_Curie`,
// `<http://dbpedia.org/resource/Marie_Curie>` and `Marie Curie` all give
// `Marie_Curie`.
inline std::string canonical_source_id(std::string_view id) {
  id = text::trim(id);
  if (id.size() >= 2 && id.front() == '<' && id.back() == '>')
    id = id.substr(1, id.size() - 2);
  if (id.find("://") != std::string_view::npos) {
    id = id.substr(id.rfind('/') + 1);
  } else if (auto colon = id.find(':');
             colon != std::string_view::npos && colon > 0 && colon <= 12) {
    std::string_view prefix = id.substr(0, colon);
    bool short_prefix = std::all_of(prefix.begin(), prefix.end(), [](char c) {
      return text::is_ascii_alnum(c) || c == '-' || c == '_';
    });
    if (short_prefix) id = id.substr(colon + 1);
  }
  std::string out(id);
  std::replace(out.begin(), out.end(), ' ', '_');
  return out;
}

// sameAs links from other knowledge bases into Wikidata, held in memory.
class SameAsStore {
 public:
  void add(TargetKb kb, std::string_view source_id, std::string_view qid) {
    auto q = wikidata_qid(qid);
    if (!q) {
      throw Error(ErrorCode::kSchemaError,
                  "not a Wikidata id: '" + std::string(qid) + "'");
    }
    links_[{kb, canonical_source_id(source_id)}] = *q;
  }

  std::optional<std::string> lookup(TargetKb kb,
                                    std::string_view source_id) const {
    auto it = links_.find({kb, canonical_source_id(source_id)});
    if (it == links_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return links_.size(); }

  // TSV rows `source_kb<TAB>source_id<TAB>wikidata_qid`; blank lines and
  // lines starting with '#' are skipped.
  static SameAsStore load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
    SameAsStore store;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (text::trim(line).empty() || line.front() == '#') continue;
      std::vector<std::string> cols;
      std::size_t start = 0;
      for (;;) {
        std::size_t tab = line.find('\t', start);
        cols.push_back(line.substr(start, tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
      }
      auto kb = cols.size() == 3 ? parse_target_kb(cols[0]) : std::nullopt;
      if (!kb) {
        throw Error(ErrorCode::kSchemaError,
                    path + ":" + std::to_string(lineno) +
                        ": expected source_kb<TAB>source_id<TAB>qid");
      }
      store.add(*kb, cols[1], cols[2]);
    }
    return store;
  }

 private:
  std::map<std::pair<TargetKb, std::string>, std::string> links_;
};

// Rewrites the candidate's identifier to a bare Wikidata Q-id. Candidates
// without a mapping come back empty.
inline std::optional<EntityCandidate> map_to_wikidata(
    const EntityCandidate& candidate, const SameAsStore& mapping) {
  std::optional<std::string> qid;
  if (candidate.kb == TargetKb::kWikidata) {
    qid = wikidata_qid(candidate.kb_id);
  } else {
    qid = mapping.lookup(candidate.kb, candidate.kb_id);
  }
  if (!qid) return std::nullopt;
  EntityCandidate out = candidate;
  out.kb_id = *qid;
  out.kb = TargetKb::kWikidata;
  return out;
}

namespace detail {

struct Tally {
  int votes = 0;
  std::vector<double> weights;
  double max_score = -HUGE_VAL;
  Span span{SIZE_MAX, SIZE_MAX};
  std::string mention;
  std::vector<std::string> systems;

  // Summed in sorted order so the total does not depend on system order.
  double weight_sum() const {
    std::vector<double> w = weights;
    std::sort(w.begin(), w.end());
    double s = 0.0;
    for (double x : w) s += x;
    return s;
  }
};

// Better-than for one system's candidates of one mention.
inline bool outranks_within_system(const EntityCandidate& a,
                                   const EntityCandidate& b) {
  return std::tie(a.score, b.kb_id, b.span, b.mention) >
         std::tie(b.score, a.kb_id, a.span, a.mention);
}

}  // namespace detail

// Each system votes, per case-folded mention, for its top-scored candidate.
// The winner of a mention has the most votes, then the highest summed
// precision weight of its voters, then the highest raw score. Winners are
// ranked across mentions by the same key, with the mention's start offset
// as the last resort.
inline RankedEntityList vote(const std::vector<SystemCandidates>& per_system,
                             const std::vector<ElSystemConfig>& configs) {
  std::map<std::string, double> weight_of;
  for (const auto& c : configs) weight_of[c.system_id] = c.precision_weight;

  // mention key -> qid -> tally
  std::map<std::string, std::map<std::string, detail::Tally>> tallies;
  for (const auto& sys : per_system) {
    std::map<std::string, const EntityCandidate*> top;
    for (const auto& cand : sys.candidates) {
      const EntityCandidate*& best = top[text::casefold(cand.mention)];
      if (best == nullptr || detail::outranks_within_system(cand, *best))
        best = &cand;
    }
    double w = weight_of.contains(sys.system_id) ? weight_of[sys.system_id] : 0.0;
    for (const auto& [key, cand] : top) {
      detail::Tally& t = tallies[key][cand->kb_id];
      ++t.votes;
      t.weights.push_back(w);
      t.max_score = std::max(t.max_score, cand->score);
      if (std::tie(cand->span, cand->mention) < std::tie(t.span, t.mention) ||
          t.mention.empty()) {
        t.span = cand->span;
        t.mention = cand->mention;
      }
      t.systems.push_back(sys.system_id);
    }
  }

  RankedEntityList winners;
  for (const auto& [key, by_entity] : tallies) {
    const std::string* best_id = nullptr;
    const detail::Tally* best = nullptr;
    double best_w = 0.0;
    for (const auto& [qid, t] : by_entity) {
      double w = t.weight_sum();
      // Map iteration is in ascending qid, so strict comparison keeps the
      // smallest id on a full tie.
      if (best == nullptr ||
          std::tie(t.votes, w, t.max_score) >
              std::tie(best->votes, best_w, best->max_score)) {
        best_id = &qid;
        best = &t;
        best_w = w;
      }
    }
    RankedEntity e;
    e.mention = best->mention;
    e.span = best->span;
    e.wikidata_id = *best_id;
    e.votes = best->votes;
    e.weight_sum = best_w;
    e.score = best->max_score;
    e.systems = best->systems;
    std::sort(e.systems.begin(), e.systems.end());
    winners.push_back(std::move(e));
  }

  std::sort(winners.begin(), winners.end(),
            [](const RankedEntity& a, const RankedEntity& b) {
              if (a.votes != b.votes) return a.votes > b.votes;
              if (a.weight_sum != b.weight_sum) return a.weight_sum > b.weight_sum;
              if (a.score != b.score) return a.score > b.score;
              return std::tie(a.span.start, a.span.end, a.mention, a.wikidata_id) <
                     std::tie(b.span.start, b.span.end, b.mention, b.wikidata_id);
            });
  for (std::size_t i = 0; i < winners.size(); ++i)
    winners[i].rank = static_cast<int>(i) + 1;
  return winners;
}

// One training question: the Q-ids of its gold annotations and what each
// linker returned for it, already mapped to Wikidata.
struct CalibrationExample {
  std::set<std::string> gold_qids;
  std::vector<SystemCandidates> outputs;
};

// Sets each system's precision weight to its micro precision over the
// training questions. A system that never links gets weight 0.
inline std::vector<ElSystemConfig> calibrate_precision_weights(
    const std::vector<CalibrationExample>& training,
    std::vector<ElSystemConfig> configs) {
  if (training.empty())
    throw Error(ErrorCode::kEmptyTrainingSet, "no calibration questions");
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
  for (const auto& ex : training) {
    for (const auto& sys : ex.outputs) {
      auto& [correct, total] = counts[sys.system_id];
      for (const auto& cand : sys.candidates) {
        ++total;
        auto q = wikidata_qid(cand.kb_id);
        if (q && ex.gold_qids.contains(*q)) ++correct;
      }
    }
  }
  for (auto& c : configs) {
    auto [correct, total] = counts[c.system_id];
    c.precision_weight =
        total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
  return configs;
}

}  // namespace kgqa
