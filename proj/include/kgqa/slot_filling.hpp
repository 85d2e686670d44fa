#pragma once

// Slot filling: decides which linked entity replaces which placeholder of a
// template, guided by the sequence labels and the ensemble's entity ranking.
//
// Stages run one after another over all still-empty placeholders, each in
// template order:
//   standard      a phrase labelled L has exactly the entity's span
//   overlap       a phrase labelled L overlaps the entity's span
//   role-relaxed  the entity's phrase carries another label; same kind
//                 beats other kinds, then closer ordinal, then EL rank
//   positional    any unused entity, by EL rank
// Within the first two stages, and the last, the best EL rank wins. An entity
// fills at most one placeholder.

#include <algorithm>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgqa/el_backends.hpp"
#include "kgqa/entity_linking.hpp"
#include "kgqa/metrics.hpp"
#include "kgqa/query_template.hpp"
#include "kgqa/sequence_labeling.hpp"

namespace kgqa {

enum class FillStage { kStandard, kOverlap, kRoleRelaxed, kPositional };

inline std::string_view fill_stage_name(FillStage s) {
  switch (s) {
    case FillStage::kStandard: return "STANDARD";
    case FillStage::kOverlap: return "OVERLAP";
    case FillStage::kRoleRelaxed: return "ROLE_RELAXED";
    case FillStage::kPositional: return "POSITIONAL";
  }
  return "";
}

struct SlotAssignment {
  PlaceholderLabel label;
  std::string entity;  // bare Q-id
  FillStage stage = FillStage::kStandard;
  std::optional<LabeledSpan> evidence_span;
  RankedEntity evidence_entity;
};

inline void to_json(nlohmann::json& j, const SlotAssignment& a) {
  j = nlohmann::json{{"label", a.label.name()},
                     {"entity", wikidata_prefixed(a.entity)},
                     {"stage", fill_stage_name(a.stage)},
                     {"entity_rank", a.evidence_entity.rank},
                     {"entity_mention", a.evidence_entity.mention}};
  j["span"] = a.evidence_span ? nlohmann::json(*a.evidence_span) : nlohmann::json(nullptr);
}

struct FilledQuery {
  std::string query;
  std::vector<SlotAssignment> assignments;  // template placeholder order
  bool complete = true;
  std::vector<PlaceholderLabel> unfilled;
};

namespace detail {

struct SlotChoice {
  const RankedEntity* entity = nullptr;
  const LabeledSpan* span = nullptr;
};

class SlotFiller {
 public:
  SlotFiller(const std::vector<LabeledSpan>& spans, const RankedEntityList& entities)
      : spans_(spans) {
    for (const auto& e : entities) by_rank_.push_back(&e);
    std::stable_sort(by_rank_.begin(), by_rank_.end(),
                     [](const RankedEntity* a, const RankedEntity* b) { return a->rank < b->rank; });
  }

  std::optional<SlotChoice> choose(FillStage stage, const PlaceholderLabel& slot) const {
    switch (stage) {
      case FillStage::kStandard:
        return by_label(slot, [](const Span& a, const Span& b) { return a == b; });
      case FillStage::kOverlap:
        return by_label(slot, [](const Span& a, const Span& b) { return overlaps(a, b); });
      case FillStage::kRoleRelaxed:
        return role_relaxed(slot);
      case FillStage::kPositional:
        for (const RankedEntity* e : by_rank_)
          if (!used_.contains(e->wikidata_id)) return SlotChoice{e, nullptr};
        return std::nullopt;
    }
    return std::nullopt;
  }

  void mark_used(const std::string& qid) { used_.insert(qid); }

 private:
  template <typename Match>
  std::optional<SlotChoice> by_label(const PlaceholderLabel& slot, Match match) const {
    for (const RankedEntity* e : by_rank_) {
      if (used_.contains(e->wikidata_id)) continue;
      for (const auto& s : spans_) {
        if (s.label == slot && match(s.span, e->span)) return SlotChoice{e, &s};
      }
    }
    return std::nullopt;
  }

  std::optional<SlotChoice> role_relaxed(const PlaceholderLabel& slot) const {
    std::optional<SlotChoice> best;
    std::tuple<int, int, int> best_key;
    for (const RankedEntity* e : by_rank_) {
      if (used_.contains(e->wikidata_id)) continue;
      for (const auto& s : spans_) {
        if (!overlaps(s.span, e->span) || s.label == slot) continue;
        std::tuple<int, int, int> key{s.label.kind == slot.kind ? 0 : 1,
                                      std::abs(s.label.ordinal - slot.ordinal), e->rank};
        if (!best || key < best_key) {
          best = SlotChoice{e, &s};
          best_key = key;
        }
      }
    }
    return best;
  }

  const std::vector<LabeledSpan>& spans_;
  std::vector<const RankedEntity*> by_rank_;
  std::set<std::string> used_;
};

}  // namespace detail

inline FilledQuery fill_slots(const QueryTemplate& tmpl, const std::vector<LabeledSpan>& spans,
                              const RankedEntityList& entities) {
  detail::SlotFiller filler(spans, entities);
  std::map<PlaceholderLabel, SlotAssignment> chosen;
  for (FillStage stage : {FillStage::kStandard, FillStage::kOverlap, FillStage::kRoleRelaxed,
                          FillStage::kPositional}) {
    for (const auto& slot : tmpl.placeholders) {
      if (chosen.contains(slot)) continue;
      auto pick = filler.choose(stage, slot);
      if (!pick) continue;
      filler.mark_used(pick->entity->wikidata_id);
      SlotAssignment a;
      a.label = slot;
      a.entity = pick->entity->wikidata_id;
      a.stage = stage;
      if (pick->span) a.evidence_span = *pick->span;
      a.evidence_entity = *pick->entity;
      chosen.emplace(slot, std::move(a));
    }
  }

  FilledQuery out;
  SlotValues values;
  for (const auto& slot : tmpl.placeholders) {
    auto it = chosen.find(slot);
    if (it == chosen.end()) continue;
    values.emplace(slot, it->second.entity);
    out.assignments.push_back(it->second);
  }
  Instantiation inst = fill(tmpl, values);
  out.query = std::move(inst.query);
  out.complete = inst.complete;
  out.unfilled = std::move(inst.unfilled);
  return out;
}

// Micro and macro scores over (label, entity) pairs. Gold values may be
// written in any form wikidata_qid understands.
inline MicroMacro evaluate_slot_pairs(const std::vector<std::vector<SlotAssignment>>& predicted,
                                      const std::vector<SlotValues>& gold) {
  if (predicted.size() != gold.size())
    throw Error(ErrorCode::kLengthMismatch, "predicted and gold question counts differ");
  PrfAccumulator acc;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::set<std::pair<PlaceholderLabel, std::string>> p, g;
    for (const auto& a : predicted[i]) p.emplace(a.label, detail::reference_key(a.entity));
    for (const auto& [label, ref] : gold[i]) g.emplace(label, detail::reference_key(ref));
    acc.add_sets(p, g);
  }
  return acc.result();
}

}  // namespace kgqa
