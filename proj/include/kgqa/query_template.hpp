#pragma once

// Query templates: SPARQL token sequences whose entity references have been
// abstracted into typed placeholders, plus the two directions between
// concrete queries and templates.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kgqa/error.hpp"
#include "kgqa/sparql.hpp"
#include "kgqa/text.hpp"

namespace kgqa {

// A knowledge-graph reference mentioned in a question and the role it plays
// in the paired query.
struct EntityAnnotation {
  std::string mention;
  Span span;
  std::string kb_id;
  PlaceholderLabel role;

  bool consistent_with(std::string_view question) const {
    return span.within(question) &&
           question.substr(span.start, span.length()) == mention;
  }

  friend bool operator==(const EntityAnnotation&,
                         const EntityAnnotation&) = default;
};

struct QueryTemplate {
  std::vector<QueryToken> tokens;
  // Distinct placeholders in order of first appearance.
  std::vector<PlaceholderLabel> placeholders;

  static QueryTemplate from_tokens(std::vector<QueryToken> tokens) {
    QueryTemplate t;
    t.tokens = std::move(tokens);
    std::set<PlaceholderLabel> seen;
    for (const auto& tok : t.tokens) {
      if (tok.placeholder && seen.insert(*tok.placeholder).second)
        t.placeholders.push_back(*tok.placeholder);
    }
    return t;
  }

  static QueryTemplate parse(std::string_view text) {
    return from_tokens(tokenize(text));
  }

  std::string text() const { return join_tokens(tokens); }

  // Ordinals of each kind run 1..n in order of first appearance.
  bool has_contiguous_ordinals() const {
    std::map<PlaceholderKind, int> next;
    for (const auto& p : placeholders) {
      int& expected = next.try_emplace(p.kind, 1).first->second;
      if (p.ordinal != expected) return false;
      ++expected;
    }
    return true;
  }

  // Keyword case and spacing do not distinguish templates.
  friend bool operator==(const QueryTemplate& a, const QueryTemplate& b) { return a.text() == b.text(); }
};

// Placeholder -> knowledge-graph reference (`wd:Q7186`, `Q7186`, a full IRI
// or a literal).
using SlotValues = std::map<PlaceholderLabel, std::string>;

struct Templatized {
  QueryTemplate query_template;
  SlotValues assignment;
};

struct Instantiation {
  std::string query;
  bool complete = true;
  std::vector<PlaceholderLabel> unfilled;
};

namespace detail {

inline std::string literal_lexical(std::string_view lit) {
  if (lit.empty() || (lit.front() != '"' && lit.front() != '\'')) return {};
  char q = lit.front();
  std::size_t width = lit.starts_with(std::string(3, q)) ? 3 : 1;
  std::size_t close = lit.rfind(q);
  if (close == std::string_view::npos || close + 1 < width * 2) return {};
  return std::string(lit.substr(width, close + 1 - 2 * width));
}

inline bool is_term_token(TokenKind kind) {
  return kind == TokenKind::kIri || kind == TokenKind::kPrefixedName ||
         kind == TokenKind::kLiteralString || kind == TokenKind::kLiteralNumber;
}

// Key under which two references to the same node compare equal.
inline std::string reference_key(std::string_view ref) {
  if (auto q = wikidata_qid(ref)) return *q;
  return std::string(ref);
}

inline bool token_refers_to(const QueryToken& tok, std::string_view kb_id) {
  if (!is_term_token(tok.kind)) return false;
  if (tok.text == kb_id) return true;
  if (auto q = wikidata_qid(tok.text)) return *q == reference_key(kb_id);
  if (tok.kind == TokenKind::kLiteralString)
    return literal_lexical(tok.text) == kb_id;
  return false;
}

inline std::string render_value(const PlaceholderLabel& label,
                                std::string_view value) {
  if (auto q = wikidata_qid(value); q && !value.starts_with('<'))
    return wikidata_prefixed(*q);
  if (label.kind == PlaceholderKind::kStr && !value.starts_with('"') &&
      !value.starts_with('\'')) {
    std::string out = "\"";
    for (char c : value) {
      if (c == '"' || c == '\\') out.push_back('\\');
      out.push_back(c);
    }
    out.push_back('"');
    return out;
  }
  return std::string(value);
}

}  // namespace detail

// Replaces every occurrence of each annotated reference by the placeholder
// of its role. The returned assignment maps each placeholder back to the
// reference as first written in the query.
inline Templatized templatize(std::string_view query,
                              const std::vector<EntityAnnotation>& annotations) {
  std::vector<QueryToken> tokens = tokenize(query);

  std::map<PlaceholderLabel, std::string> role_owner;
  std::map<std::string, PlaceholderLabel> entity_role;
  for (const auto& a : annotations) {
    std::string key = detail::reference_key(a.kb_id);
    auto [it, fresh] = role_owner.emplace(a.role, key);
    if (!fresh && it->second != key) {
      throw Error(ErrorCode::kRoleCollision,
                  a.role.name() + " annotated with both " + it->second +
                      " and " + key);
    }
    auto [eit, efresh] = entity_role.emplace(key, a.role);
    if (!efresh && eit->second != a.role) {
      throw Error(ErrorCode::kRoleCollision,
                  key + " annotated with both " + eit->second.name() +
                      " and " + a.role.name());
    }
  }

  Templatized out;
  for (const auto& [role, key] : role_owner) {
    bool found = false;
    for (auto& tok : tokens) {
      if (!detail::token_refers_to(tok, key)) continue;
      if (!found) out.assignment.emplace(role, tok.text);
      found = true;
      tok = QueryToken::make(TokenKind::kPlaceholder, role.tag());
    }
    if (!found) {
      throw Error(ErrorCode::kUnknownEntityInQuery,
                  key + " does not occur in the query");
    }
  }
  out.query_template = QueryTemplate::from_tokens(std::move(tokens));
  return out;
}

// Substitutes assigned placeholders everywhere they occur. Unassigned
// placeholders stay verbatim and the result is marked incomplete.
inline Instantiation fill(const QueryTemplate& tmpl, const SlotValues& values) {
  Instantiation out;
  std::vector<QueryToken> tokens;
  tokens.reserve(tmpl.tokens.size());
  std::set<PlaceholderLabel> missing;
  for (const auto& tok : tmpl.tokens) {
    if (!tok.placeholder) {
      tokens.push_back(tok);
      continue;
    }
    auto it = values.find(*tok.placeholder);
    if (it == values.end()) {
      tokens.push_back(tok);
      missing.insert(*tok.placeholder);
      continue;
    }
    tokens.push_back(
        {TokenKind::kIri, detail::render_value(it->first, it->second), {}});
  }
  for (const auto& p : tmpl.placeholders) {
    if (missing.contains(p)) out.unfilled.push_back(p);
  }
  out.complete = out.unfilled.empty();
  out.query = join_tokens(tokens);
  return out;
}

// Wikidata entity reference found in a query together with the role implied
// by its position in the first triple pattern it occurs in.
struct InferredRole {
  std::string reference;  // as written in the query
  std::string qid;
  PlaceholderLabel role;
};

// Subject position gives SUBJ, any other position OBJ. Ordinals count first
// appearances within each kind.
inline std::vector<InferredRole> infer_roles(std::string_view query) {
  enum class Pos { kSubject, kPredicate, kObject, kOther };
  std::vector<QueryToken> tokens = tokenize(query);
  std::vector<InferredRole> out;
  std::set<std::string> seen;
  std::map<PlaceholderKind, int> counters;

  Pos pos = Pos::kOther;
  int paren_depth = 0;
  bool in_values = false;
  for (const auto& tok : tokens) {
    if (tok.kind == TokenKind::kPunct) {
      const std::string& p = tok.text;
      if (p == "(") {
        ++paren_depth;
      } else if (p == ")") {
        if (paren_depth > 0 && --paren_depth == 0 && !in_values)
          pos = Pos::kSubject;
      } else if (p == "{") {
        pos = in_values ? Pos::kOther : Pos::kSubject;
      } else if (p == "}") {
        in_values = false;
        pos = Pos::kSubject;
      } else if (p == ".") {
        pos = Pos::kSubject;
      } else if (p == ";") {
        pos = Pos::kPredicate;
      } else if (p == ",") {
        pos = Pos::kObject;
      } else if (p == "/" || p == "|" || p == "^") {
        pos = Pos::kPredicate;
      }
      continue;
    }
    if (tok.kind == TokenKind::kKeyword && tok.text != "a") {
      if (text::upper(tok.text) == "VALUES") in_values = true;
      continue;
    }
    bool term = detail::is_term_token(tok.kind) ||
                tok.kind == TokenKind::kVariable ||
                tok.kind == TokenKind::kPlaceholder || tok.text == "a";
    if (!term) continue;

    Pos here = paren_depth > 0 || in_values ? Pos::kOther : pos;
    if (auto q = wikidata_qid(tok.text);
        q && detail::is_term_token(tok.kind) && seen.insert(*q).second) {
      PlaceholderKind kind = here == Pos::kSubject ? PlaceholderKind::kSubj
                                                   : PlaceholderKind::kObj;
      int ordinal = ++counters[kind];
      out.push_back({tok.text, *q, PlaceholderLabel{kind, ordinal}});
    }
    if (paren_depth == 0 && !in_values) {
      switch (pos) {
        case Pos::kSubject: pos = Pos::kPredicate; break;
        case Pos::kPredicate: pos = Pos::kObject; break;
        default: pos = Pos::kOther; break;
      }
    }
  }
  return out;
}

}  // namespace kgqa
