#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "kgqa/error.hpp"

namespace kgqa {

enum class AnswerKind { kBoolean, kBindings, kError };

// Variable name (without '?') -> RDF term in N-Triples syntax.
using BindingRow = std::map<std::string, std::string>;

// Result of executing one query. Exactly one of boolean/rows/error is set,
// matching kind.
struct AnswerSet {
  AnswerKind kind = AnswerKind::kError;
  std::optional<bool> boolean;
  std::optional<std::set<BindingRow>> rows;
  std::optional<std::string> error;

  static AnswerSet of_boolean(bool value) {
    AnswerSet a;
    a.kind = AnswerKind::kBoolean;
    a.boolean = value;
    return a;
  }
  static AnswerSet of_rows(std::set<BindingRow> rows) {
    AnswerSet a;
    a.kind = AnswerKind::kBindings;
    a.rows = std::move(rows);
    return a;
  }
  static AnswerSet of_error(std::string message) {
    AnswerSet a;
    a.kind = AnswerKind::kError;
    a.error = std::move(message);
    return a;
  }

  bool is_error() const { return kind == AnswerKind::kError; }
  // Non-error with something in it: a boolean, or at least one row.
  bool has_results() const {
    return kind == AnswerKind::kBoolean || (kind == AnswerKind::kBindings && !rows->empty());
  }

  friend bool operator==(const AnswerSet&, const AnswerSet&) = default;
};

inline void to_json(nlohmann::json& j, const AnswerSet& a) {
  switch (a.kind) {
    case AnswerKind::kBoolean:
      j = nlohmann::json{{"kind", "BOOLEAN"}, {"boolean", *a.boolean}};
      break;
    case AnswerKind::kBindings: {
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& r : *a.rows) rows.push_back(r);
      j = nlohmann::json{{"kind", "BINDINGS"}, {"rows", rows}};
      break;
    }
    case AnswerKind::kError:
      j = nlohmann::json{{"kind", "ERROR"}, {"error", *a.error}};
      break;
  }
}

inline void from_json(const nlohmann::json& j, AnswerSet& a) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "BOOLEAN") {
    a = AnswerSet::of_boolean(j.at("boolean").get<bool>());
  } else if (kind == "BINDINGS") {
    std::set<BindingRow> rows;
    for (const auto& r : j.at("rows")) rows.insert(r.get<BindingRow>());
    a = AnswerSet::of_rows(std::move(rows));
  } else if (kind == "ERROR") {
    a = AnswerSet::of_error(j.at("error").get<std::string>());
  } else {
    throw Error(ErrorCode::kSchemaError, "unknown answer kind '" + kind + "'");
  }
}

}  // namespace kgqa
