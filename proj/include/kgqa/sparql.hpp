#pragma once

// SPARQL lexing, placeholder labels and syntactic normalization.

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kgqa/error.hpp"
#include "kgqa/text.hpp"

namespace kgqa {

enum class PlaceholderKind { kSubj, kObj, kStr, kNum };

inline std::string_view placeholder_kind_name(PlaceholderKind kind) {
  switch (kind) {
    case PlaceholderKind::kSubj: return "subj";
    case PlaceholderKind::kObj: return "obj";
    case PlaceholderKind::kStr: return "str";
    case PlaceholderKind::kNum: return "num";
  }
  return "";
}

// A typed slot such as obj1 or subj2. Serialized as `<obj1>` inside query
// templates and as `obj1` in sequence labels.
struct PlaceholderLabel {
  PlaceholderKind kind = PlaceholderKind::kObj;
  int ordinal = 1;

  std::string name() const {
    return std::string(placeholder_kind_name(kind)) + std::to_string(ordinal);
  }
  std::string tag() const { return "<" + name() + ">"; }

  // Accepts both `obj1` and `<obj1>`; nullopt for anything else.
  static std::optional<PlaceholderLabel> parse(std::string_view s) {
    if (s.size() >= 2 && s.front() == '<') {
      if (s.back() != '>') return std::nullopt;
      s = s.substr(1, s.size() - 2);
    }
    static constexpr PlaceholderKind kKinds[] = {
        PlaceholderKind::kSubj, PlaceholderKind::kObj, PlaceholderKind::kStr,
        PlaceholderKind::kNum};
    for (PlaceholderKind kind : kKinds) {
      std::string_view prefix = placeholder_kind_name(kind);
      if (!s.starts_with(prefix)) continue;
      std::string_view digits = s.substr(prefix.size());
      if (digits.empty() || digits.size() > 6 || digits.front() == '0')
        return std::nullopt;
      int ordinal = 0;
      for (char c : digits) {
        if (c < '0' || c > '9') return std::nullopt;
        ordinal = ordinal * 10 + (c - '0');
      }
      return PlaceholderLabel{kind, ordinal};
    }
    return std::nullopt;
  }

  static PlaceholderLabel parse_or_throw(std::string_view s) {
    auto label = parse(s);
    if (!label) {
      throw Error(ErrorCode::kBadPlaceholder,
                  "not a placeholder label: '" + std::string(s) + "'");
    }
    return *label;
  }

  friend bool operator==(const PlaceholderLabel&,
                         const PlaceholderLabel&) = default;
  friend auto operator<=>(const PlaceholderLabel&,
                          const PlaceholderLabel&) = default;
};

enum class TokenKind {
  kKeyword,
  kVariable,
  kIri,
  kPrefixedName,
  kLiteralString,
  kLiteralNumber,
  kPunct,
  kPlaceholder,
};

inline std::string_view token_kind_name(TokenKind kind) {
  switch (kind) {
    case TokenKind::kKeyword: return "KEYWORD";
    case TokenKind::kVariable: return "VARIABLE";
    case TokenKind::kIri: return "IRI";
    case TokenKind::kPrefixedName: return "PREFIXED_NAME";
    case TokenKind::kLiteralString: return "LITERAL_STRING";
    case TokenKind::kLiteralNumber: return "LITERAL_NUMBER";
    case TokenKind::kPunct: return "PUNCT";
    case TokenKind::kPlaceholder: return "PLACEHOLDER";
  }
  return "";
}

struct QueryToken {
  TokenKind kind = TokenKind::kPunct;
  std::string text;
  // Present iff kind == kPlaceholder.
  std::optional<PlaceholderLabel> placeholder;

  static QueryToken make(TokenKind kind, std::string text) {
    QueryToken t{kind, std::move(text), std::nullopt};
    if (kind == TokenKind::kPlaceholder)
      t.placeholder = PlaceholderLabel::parse_or_throw(t.text);
    return t;
  }

  friend bool operator==(const QueryToken&, const QueryToken&) = default;
};

namespace detail {

inline bool is_name_start(char c) {
  return text::is_ascii_alnum(c) || c == '_' ||
         static_cast<unsigned char>(c) >= 0x80;
}

inline bool is_name_char(char c) { return is_name_start(c) || c == '-'; }

inline bool is_local_char(char c) {
  return is_name_char(c) || c == '.' || c == ':' || c == '%';
}

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Characters that terminate an IRIREF (besides '>').
inline bool breaks_iri(char c) {
  return text::is_space(c) || c == '<' || c == '"' || c == '{' || c == '}' ||
         c == '|' || c == '^' || c == '`' || c == '\\';
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<QueryToken> run() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (text::is_space(c)) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      } else if (c == '<') {
        lex_angle();
      } else if (c == '"' || c == '\'') {
        lex_string();
      } else if (c == '?' || c == '$') {
        lex_variable();
      } else if (is_digit(c)) {
        lex_number();
      } else if (is_name_start(c) || c == ':') {
        lex_word();
      } else {
        lex_punct();
      }
    }
    if (!open_.empty()) {
      throw Error(ErrorCode::kUnbalancedDelimiter,
                  std::string("unclosed '") + open_.back() + "'");
    }
    return std::move(tokens_);
  }

 private:
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  void emit(TokenKind kind, std::size_t begin) {
    tokens_.push_back(QueryToken::make(
        kind, std::string(src_.substr(begin, pos_ - begin))));
  }

  void lex_angle() {
    std::size_t begin = pos_;
    std::size_t j = pos_ + 1;
    while (j < src_.size() && src_[j] != '>' && !breaks_iri(src_[j])) ++j;
    if (j < src_.size() && src_[j] == '>') {
      pos_ = j + 1;
      std::string_view body = src_.substr(begin, pos_ - begin);
      emit(PlaceholderLabel::parse(body) ? TokenKind::kPlaceholder
                                         : TokenKind::kIri,
           begin);
      return;
    }
    if (j == src_.size() && j > pos_ + 1) {
      throw Error(ErrorCode::kUnbalancedDelimiter,
                  "unclosed '<' at offset " + std::to_string(begin));
    }
    // Comparison operator.
    pos_ += peek(1) == '=' ? 2 : 1;
    emit(TokenKind::kPunct, begin);
  }

  void lex_string() {
    std::size_t begin = pos_;
    char quote = src_[pos_];
    bool long_form = peek(1) == quote && peek(2) == quote;
    pos_ += long_form ? 3 : 1;
    for (;;) {
      if (pos_ >= src_.size()) {
        throw Error(ErrorCode::kUnbalancedDelimiter,
                    "unterminated string literal at offset " +
                        std::to_string(begin));
      }
      char c = src_[pos_];
      if (c == '\\') {
        pos_ += 2;
        continue;
      }
      if (c == quote) {
        if (!long_form) {
          ++pos_;
          break;
        }
        if (peek(1) == quote && peek(2) == quote) {
          pos_ += 3;
          break;
        }
      }
      ++pos_;
    }
    if (peek() == '@') {
      ++pos_;
      while (pos_ < src_.size() &&
             (text::is_ascii_alnum(src_[pos_]) || src_[pos_] == '-'))
        ++pos_;
    } else if (peek() == '^' && peek(1) == '^') {
      pos_ += 2;
      if (peek() == '<') {
        std::size_t j = pos_ + 1;
        while (j < src_.size() && src_[j] != '>' && !breaks_iri(src_[j])) ++j;
        if (j >= src_.size() || src_[j] != '>') {
          throw Error(ErrorCode::kUnbalancedDelimiter,
                      "unclosed datatype IRI at offset " +
                          std::to_string(pos_));
        }
        pos_ = j + 1;
      } else {
        scan_prefixed_name();
      }
    }
    emit(TokenKind::kLiteralString, begin);
  }

  void lex_variable() {
    std::size_t begin = pos_;
    if (!is_name_start(peek(1))) {
      ++pos_;
      emit(TokenKind::kPunct, begin);
      return;
    }
    ++pos_;
    while (pos_ < src_.size() && is_name_start(src_[pos_])) ++pos_;
    emit(TokenKind::kVariable, begin);
  }

  void lex_number() {
    std::size_t begin = pos_;
    while (is_digit(peek())) ++pos_;
    if (peek() == '.' && is_digit(peek(1))) {
      ++pos_;
      while (is_digit(peek())) ++pos_;
    }
    if ((peek() == 'e' || peek() == 'E') &&
        (is_digit(peek(1)) ||
         ((peek(1) == '+' || peek(1) == '-') && is_digit(peek(2))))) {
      pos_ += 2;
      while (is_digit(peek())) ++pos_;
    }
    emit(TokenKind::kLiteralNumber, begin);
  }

  // Consumes `prefix:local`; returns false if no ':' was seen.
  bool scan_prefixed_name() {
    while (pos_ < src_.size() && is_name_char(src_[pos_])) ++pos_;
    if (peek() != ':') return false;
    ++pos_;
    while (pos_ < src_.size() && is_local_char(src_[pos_])) ++pos_;
    // Local names cannot end with '.'; that dot terminates a triple.
    while (src_[pos_ - 1] == '.') --pos_;
    return true;
  }

  void lex_word() {
    std::size_t begin = pos_;
    if (peek() != ':') {
      while (pos_ < src_.size() &&
             (is_name_start(src_[pos_]) ||
              (src_[pos_] == '-' && is_name_start(peek(1)) &&
               lookahead_has_colon())))
        ++pos_;
      if (peek() != ':') {
        emit(TokenKind::kKeyword, begin);
        return;
      }
      pos_ = begin;
    }
    scan_prefixed_name();
    emit(TokenKind::kPrefixedName, begin);
  }

  // Within a word, a '-' belongs to a prefix only when a ':' follows.
  bool lookahead_has_colon() const {
    std::size_t j = pos_;
    while (j < src_.size() && is_name_char(src_[j])) ++j;
    return j < src_.size() && src_[j] == ':';
  }

  void lex_punct() {
    std::size_t begin = pos_;
    char c = src_[pos_];
    char n = peek(1);
    if ((c == '&' && n == '&') || (c == '|' && n == '|') ||
        (c == '!' && n == '=') || (c == '>' && n == '=') ||
        (c == '^' && n == '^')) {
      pos_ += 2;
      emit(TokenKind::kPunct, begin);
      return;
    }
    switch (c) {
      case '{': case '(': case '[':
        open_.push_back(c);
        break;
      case '}': close('{', c); break;
      case ')': close('(', c); break;
      case ']': close('[', c); break;
      case '.': case ';': case ',': case '*': case '=': case '>': case '!':
      case '/': case '|': case '^': case '+': case '-':
        break;
      default:
        throw Error(ErrorCode::kInvalidToken,
                    std::string("unexpected character '") + c +
                        "' at offset " + std::to_string(pos_));
    }
    ++pos_;
    emit(TokenKind::kPunct, begin);
  }

  void close(char expected, char got) {
    if (open_.empty() || open_.back() != expected) {
      throw Error(ErrorCode::kUnbalancedDelimiter,
                  std::string("unmatched '") + got + "' at offset " +
                      std::to_string(pos_));
    }
    open_.pop_back();
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::vector<char> open_;
  std::vector<QueryToken> tokens_;
};

}  // namespace detail

// Splits a SPARQL query (or template) into tokens. Comments are dropped.
// Throws Error(kUnbalancedDelimiter) on unclosed IRIs, literals and
// brackets, Error(kInvalidToken) on characters no token can start with.
inline std::vector<QueryToken> tokenize(std::string_view query) {
  return detail::Lexer(query).run();
}

// Case-insensitive except for `a`, which SPARQL treats as a keyword only in
// lower case.
inline std::string normalize_keyword(std::string_view word) {
  if (word == "a") return "a";
  return text::upper(word);
}

inline std::string join_tokens(const std::vector<QueryToken>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    if (t.kind == TokenKind::kKeyword) {
      out += normalize_keyword(t.text);
    } else {
      out += t.text;
    }
  }
  return out;
}

// Canonical syntactic form used for exact-match comparison: keywords
// upper-cased, tokens separated by one space. Variables, prefixes and
// triple order are left as written.
inline std::string normalize(std::string_view query) {
  return join_tokens(tokenize(query));
}

// SPARQL 1.1 keywords and built-in function names, upper case.
inline bool is_known_keyword(std::string_view word) {
  static const std::set<std::string, std::less<>> kKeywords = {
      "SELECT", "ASK", "CONSTRUCT", "DESCRIBE", "WHERE", "FROM", "NAMED",
      "PREFIX", "BASE", "DISTINCT", "REDUCED", "AS", "ORDER", "BY", "ASC",
      "DESC", "LIMIT", "OFFSET", "GROUP", "HAVING", "FILTER", "OPTIONAL",
      "UNION", "MINUS", "GRAPH", "SERVICE", "SILENT", "BIND", "VALUES",
      "UNDEF", "NOT", "IN", "EXISTS", "COUNT", "SUM", "MIN", "MAX", "AVG",
      "SAMPLE", "GROUP_CONCAT", "SEPARATOR", "STR", "LANG", "LANGMATCHES",
      "DATATYPE", "BOUND", "IRI", "URI", "BNODE", "RAND", "ABS", "CEIL",
      "FLOOR", "ROUND", "CONCAT", "STRLEN", "UCASE", "LCASE",
      "ENCODE_FOR_URI", "CONTAINS", "STRSTARTS", "STRENDS", "STRBEFORE",
      "STRAFTER", "YEAR", "MONTH", "DAY", "HOURS", "MINUTES", "SECONDS",
      "TIMEZONE", "TZ", "NOW", "UUID", "STRUUID", "MD5", "SHA1", "SHA256",
      "SHA384", "SHA512", "COALESCE", "IF", "STRLANG", "STRDT", "SAMETERM",
      "ISIRI", "ISURI", "ISBLANK", "ISLITERAL", "ISNUMERIC", "REGEX",
      "SUBSTR", "REPLACE", "TRUE", "FALSE"};
  if (word == "a") return true;
  return kKeywords.contains(text::upper(word));
}

inline constexpr std::string_view kWikidataEntityIri =
    "http://www.wikidata.org/entity/";

// Q-id of a Wikidata entity reference (`wd:Q7186`, `Q7186` or the full
// entity IRI); nullopt for anything else.
inline std::optional<std::string> wikidata_qid(std::string_view ref) {
  if (ref.size() >= 2 && ref.front() == '<' && ref.back() == '>')
    ref = ref.substr(1, ref.size() - 2);
  if (ref.starts_with(kWikidataEntityIri)) {
    ref.remove_prefix(kWikidataEntityIri.size());
  } else if (ref.starts_with("wd:")) {
    ref.remove_prefix(3);
  }
  if (ref.size() < 2 || ref.front() != 'Q') return std::nullopt;
  for (char c : ref.substr(1)) {
    if (!detail::is_digit(c)) return std::nullopt;
  }
  return std::string(ref);
}

// The prefixed form emitted into filled queries.
inline std::string wikidata_prefixed(std::string_view qid) {
  return "wd:" + std::string(qid);
}

}  // namespace kgqa
