#pragma once

// In-memory triple store answering the SPARQL subset needed for offline
// evaluation: PREFIX declarations, ASK and SELECT over one basic graph
// pattern ('.', ';' and ',' abbreviations), DISTINCT, COUNT aggregates and
// LIMIT. Anything else is answered with an ERROR answer set.

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kgqa/answer_set.hpp"
#include "kgqa/error.hpp"
#include "kgqa/sparql.hpp"
#include "kgqa/text.hpp"

namespace kgqa {

inline constexpr std::string_view kXsd = "http://www.w3.org/2001/XMLSchema#";
inline constexpr std::string_view kRdfType = "<http://www.w3.org/1999/02/22-rdf-syntax-ns#type>";

// Prefixes the Wikidata query service predeclares, plus a few common ones.
inline const std::map<std::string, std::string>& default_prefixes() {
  static const std::map<std::string, std::string> kPrefixes = {
      {"wd", "http://www.wikidata.org/entity/"},
      {"wds", "http://www.wikidata.org/entity/statement/"},
      {"wdt", "http://www.wikidata.org/prop/direct/"},
      {"p", "http://www.wikidata.org/prop/"},
      {"ps", "http://www.wikidata.org/prop/statement/"},
      {"pq", "http://www.wikidata.org/prop/qualifier/"},
      {"rdf", "http://www.w3.org/1999/02/22-rdf-syntax-ns#"},
      {"rdfs", "http://www.w3.org/2000/01/rdf-schema#"},
      {"xsd", std::string(kXsd)},
      {"owl", "http://www.w3.org/2002/07/owl#"},
      {"schema", "http://schema.org/"},
      {"skos", "http://www.w3.org/2004/02/skos/core#"},
      {"dbo", "http://dbpedia.org/ontology/"},
      {"dbr", "http://dbpedia.org/resource/"},
  };
  return kPrefixes;
}

namespace detail {

struct FixtureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string typed_literal(std::string_view lexical, std::string_view datatype_local) {
  return "\"" + std::string(lexical) + "\"^^<" + std::string(kXsd) + std::string(datatype_local) + ">";
}

class TermResolver {
 public:
  TermResolver() : prefixes_(default_prefixes()) {}

  void declare(const std::string& prefix, const std::string& iri) { prefixes_[prefix] = iri; }

  std::string expand(std::string_view prefixed) const {
    auto colon = prefixed.find(':');
    std::string prefix(prefixed.substr(0, colon));
    auto it = prefixes_.find(prefix);
    if (it == prefixes_.end()) throw FixtureError("undeclared prefix '" + prefix + ":'");
    return "<" + it->second + std::string(prefixed.substr(colon + 1)) + ">";
  }

  // N-Triples form of a constant term token.
  std::string canonical(const QueryToken& tok) const {
    switch (tok.kind) {
      case TokenKind::kIri:
        return tok.text;
      case TokenKind::kPrefixedName:
        return expand(tok.text);
      case TokenKind::kLiteralNumber:
        if (tok.text.find_first_of("eE") != std::string::npos) return typed_literal(tok.text, "double");
        if (tok.text.find('.') != std::string::npos) return typed_literal(tok.text, "decimal");
        return typed_literal(tok.text, "integer");
      case TokenKind::kLiteralString:
        return canonical_string(tok.text);
      case TokenKind::kKeyword: {
        if (tok.text == "a") return std::string(kRdfType);
        std::string up = text::upper(tok.text);
        if (up == "TRUE" || up == "FALSE") return typed_literal(text::casefold(tok.text), "boolean");
        break;
      }
      default:
        break;
    }
    throw FixtureError("not a constant term: '" + tok.text + "'");
  }

 private:
  std::string canonical_string(std::string_view lit) const {
    char q = lit.front();
    std::size_t width = lit.starts_with(std::string(3, q)) ? 3 : 1;
    std::size_t i = width;
    while (i < lit.size()) {
      if (lit[i] == '\\') {
        i += 2;
        continue;
      }
      if (lit.substr(i, width) == std::string(width, q)) break;
      ++i;
    }
    std::string out = "\"" + std::string(lit.substr(width, i - width)) + "\"";
    std::string_view rest = lit.substr(i + width);
    if (rest.starts_with("@")) {
      out += text::casefold(rest);
    } else if (rest.starts_with("^^")) {
      rest.remove_prefix(2);
      out += "^^";
      out += rest.starts_with("<") ? std::string(rest) : expand(rest);
    }
    return out;
  }

  std::map<std::string, std::string> prefixes_;
};

struct PatternTerm {
  bool is_var = false;
  std::string value;  // variable name or canonical constant
};

struct TriplePattern {
  PatternTerm s, p, o;
};

struct Projection {
  std::string var;        // output name
  bool count = false;
  bool count_distinct = false;
  std::string counted;    // counted variable; empty for COUNT(*)
};

struct ParsedQuery {
  bool ask = false;
  bool select_all = false;
  std::vector<Projection> projections;
  std::vector<TriplePattern> patterns;
  std::optional<std::size_t> limit;
};

class SubsetParser {
 public:
  explicit SubsetParser(std::vector<QueryToken> tokens) : toks_(std::move(tokens)) {}

  ParsedQuery parse() {
    ParsedQuery q;
    while (keyword("PREFIX")) {
      const QueryToken& name = next();
      const QueryToken& iri = next();
      if (name.kind != TokenKind::kPrefixedName || iri.kind != TokenKind::kIri)
        throw FixtureError("malformed PREFIX declaration");
      resolver_.declare(name.text.substr(0, name.text.find(':')), iri.text.substr(1, iri.text.size() - 2));
    }
    if (keyword("ASK")) {
      q.ask = true;
    } else if (keyword("SELECT")) {
      keyword("DISTINCT") || keyword("REDUCED");
      parse_projection(q);
    } else {
      throw FixtureError("only ASK and SELECT queries are supported");
    }
    keyword("WHERE");
    parse_group(q);
    if (keyword("LIMIT")) {
      const QueryToken& n = next();
      if (n.kind != TokenKind::kLiteralNumber) throw FixtureError("LIMIT expects an integer");
      q.limit = std::stoul(n.text);
    }
    if (pos_ != toks_.size()) throw FixtureError("unsupported clause at '" + toks_[pos_].text + "'");
    return q;
  }

 private:
  const QueryToken& peek() const {
    static const QueryToken kEnd{TokenKind::kPunct, "", std::nullopt};
    return pos_ < toks_.size() ? toks_[pos_] : kEnd;
  }
  const QueryToken& next() {
    if (pos_ >= toks_.size()) throw FixtureError("unexpected end of query");
    return toks_[pos_++];
  }
  bool keyword(std::string_view kw) {
    if (peek().kind == TokenKind::kKeyword && text::upper(peek().text) == kw) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool punct(std::string_view p) {
    if (peek().kind == TokenKind::kPunct && peek().text == p) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(std::string_view p) {
    if (!punct(p)) throw FixtureError("expected '" + std::string(p) + "' at '" + peek().text + "'");
  }
  std::string variable() {
    const QueryToken& t = next();
    if (t.kind != TokenKind::kVariable) throw FixtureError("expected a variable at '" + t.text + "'");
    return t.text.substr(1);
  }

  void parse_projection(ParsedQuery& q) {
    if (punct("*")) {
      q.select_all = true;
      return;
    }
    while (peek().kind == TokenKind::kVariable || (peek().kind == TokenKind::kPunct && peek().text == "(")) {
      if (peek().kind == TokenKind::kVariable) {
        q.projections.push_back({variable(), false, false, {}});
        continue;
      }
      expect("(");
      if (!keyword("COUNT")) throw FixtureError("only COUNT aggregates are supported");
      Projection p;
      p.count = true;
      expect("(");
      p.count_distinct = keyword("DISTINCT");
      if (!punct("*")) p.counted = variable();
      expect(")");
      if (!keyword("AS")) throw FixtureError("aggregate needs AS");
      p.var = variable();
      expect(")");
      q.projections.push_back(std::move(p));
    }
    if (q.projections.empty()) throw FixtureError("empty projection");
  }

  PatternTerm term() {
    const QueryToken& t = next();
    if (t.kind == TokenKind::kVariable) return {true, t.text.substr(1)};
    return {false, resolver_.canonical(t)};
  }

  void parse_group(ParsedQuery& q) {
    expect("{");
    while (!punct("}")) {
      PatternTerm s = term();
      for (;;) {
        PatternTerm p = term();
        for (;;) {
          q.patterns.push_back({s, p, term()});
          if (!punct(",")) break;
        }
        if (!punct(";")) break;
        if (peek().text == "." || peek().text == "}") break;
      }
      if (!punct(".") && !(peek().kind == TokenKind::kPunct && peek().text == "}"))
        throw FixtureError("unsupported graph pattern at '" + peek().text + "'");
    }
  }

  std::vector<QueryToken> toks_;
  std::size_t pos_ = 0;
  TermResolver resolver_;
};

}  // namespace detail

class FixtureStore {
 public:
  struct Triple {
    std::string s, p, o;
    friend auto operator<=>(const Triple&, const Triple&) = default;
  };

  void add(Triple t) { triples_.insert(std::move(t)); }
  std::size_t size() const { return triples_.size(); }

  // One triple per line in SPARQL term syntax (prefixed names allowed, an
  // optional trailing '.'); '#' starts a comment.
  static FixtureStore load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open triple fixture " + path);
    FixtureStore store;
    detail::TermResolver resolver;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::vector<QueryToken> toks;
      try {
        toks = tokenize(line);
      } catch (const Error& e) {
        throw Error(ErrorCode::kSchemaError, path + ":" + std::to_string(lineno) + ": " + e.what());
      }
      if (toks.empty()) continue;
      if (!toks.empty() && toks.back().kind == TokenKind::kPunct && toks.back().text == ".") toks.pop_back();
      if (toks.size() != 3)
        throw Error(ErrorCode::kSchemaError, path + ":" + std::to_string(lineno) + ": expected one triple");
      try {
        store.add({resolver.canonical(toks[0]), resolver.canonical(toks[1]), resolver.canonical(toks[2])});
      } catch (const detail::FixtureError& e) {
        throw Error(ErrorCode::kSchemaError, path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    return store;
  }

  AnswerSet query(std::string_view sparql) const {
    detail::ParsedQuery q;
    try {
      q = detail::SubsetParser(tokenize(sparql)).parse();
    } catch (const detail::FixtureError& e) {
      return AnswerSet::of_error(std::string("fixture store: ") + e.what());
    } catch (const Error& e) {
      return AnswerSet::of_error(e.what());
    }

    std::vector<std::map<std::string, std::string>> solutions;
    std::map<std::string, std::string> binding;
    match(q.patterns, 0, binding, solutions);

    if (q.ask) return AnswerSet::of_boolean(!solutions.empty());

    bool aggregate = false;
    for (const auto& p : q.projections) aggregate |= p.count;
    std::set<BindingRow> rows;
    if (aggregate) {
      BindingRow row;
      for (const auto& p : q.projections) {
        if (!p.count) return AnswerSet::of_error("fixture store: mixing aggregates and variables needs GROUP BY");
        std::set<std::string> distinct;
        std::size_t n = 0;
        for (const auto& sol : solutions) {
          if (p.counted.empty()) {
            distinct.insert(row_key(sol));
            ++n;
          } else if (auto it = sol.find(p.counted); it != sol.end()) {
            distinct.insert(it->second);
            ++n;
          }
        }
        row[p.var] = detail::typed_literal(std::to_string(p.count_distinct ? distinct.size() : n), "integer");
      }
      rows.insert(std::move(row));
      return AnswerSet::of_rows(std::move(rows));
    }

    std::size_t emitted = 0;
    for (const auto& sol : solutions) {
      if (q.limit && emitted >= *q.limit) break;
      BindingRow row;
      if (q.select_all) {
        row = sol;
      } else {
        for (const auto& p : q.projections)
          if (auto it = sol.find(p.var); it != sol.end()) row[p.var] = it->second;
      }
      if (rows.insert(std::move(row)).second) ++emitted;
    }
    return AnswerSet::of_rows(std::move(rows));
  }

 private:
  static std::string row_key(const std::map<std::string, std::string>& sol) {
    std::string k;
    for (const auto& [var, val] : sol) k += var + "=" + val + "\x1f";
    return k;
  }

  static bool unify(const detail::PatternTerm& pt, const std::string& value,
                    std::map<std::string, std::string>& binding, std::vector<std::string>& bound) {
    if (!pt.is_var) return pt.value == value;
    auto it = binding.find(pt.value);
    if (it != binding.end()) return it->second == value;
    binding.emplace(pt.value, value);
    bound.push_back(pt.value);
    return true;
  }

  void match(const std::vector<detail::TriplePattern>& patterns, std::size_t i,
             std::map<std::string, std::string>& binding,
             std::vector<std::map<std::string, std::string>>& out) const {
    if (i == patterns.size()) {
      out.push_back(binding);
      return;
    }
    const auto& tp = patterns[i];
    for (const auto& t : triples_) {
      std::vector<std::string> bound;
      if (unify(tp.s, t.s, binding, bound) && unify(tp.p, t.p, binding, bound) &&
          unify(tp.o, t.o, binding, bound)) {
        match(patterns, i + 1, binding, out);
      }
      for (const auto& v : bound) binding.erase(v);
    }
  }

  std::set<Triple> triples_;
};

}  // namespace kgqa
