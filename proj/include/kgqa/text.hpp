#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace kgqa {

// Half-open character interval [start, end) into a question string (byte
// offsets into the UTF-8 text).
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end > start ? end - start : 0; }
  bool empty() const { return end <= start; }
  bool within(std::string_view text) const {
    return start <= end && end <= text.size();
  }

  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

// Nonzero-length intersection.
inline bool overlaps(const Span& a, const Span& b) {
  return std::max(a.start, b.start) < std::min(a.end, b.end);
}

namespace text {

inline bool is_ascii_alnum(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z');
}

inline char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline char ascii_upper(char c) {
  return (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c;
}

// ASCII case folding; non-ASCII bytes pass through untouched.
inline std::string casefold(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), ascii_lower);
  return out;
}

inline std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), ascii_upper);
  return out;
}

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Number of Unicode code points in a UTF-8 string.
inline std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

// Word tokens: maximal runs of ASCII alphanumerics or non-ASCII bytes,
// case-folded. Punctuation and whitespace separate words.
inline std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (is_ascii_alnum(c) || static_cast<unsigned char>(c) >= 0x80) {
      cur.push_back(ascii_lower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

using Multiset = std::map<std::string, int>;

inline Multiset multiset_of(const std::vector<std::string>& tokens) {
  Multiset m;
  for (const auto& t : tokens) ++m[t];
  return m;
}

// True when every element of `sub` occurs in `super` at least as often.
inline bool multiset_contains(const Multiset& super, const Multiset& sub) {
  for (const auto& [tok, n] : sub) {
    auto it = super.find(tok);
    if (it == super.end() || it->second < n) return false;
  }
  return true;
}

// Multiset Jaccard: sum of min counts over sum of max counts.
inline double multiset_jaccard(const Multiset& a, const Multiset& b) {
  long inter = 0;
  long uni = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      uni += ia->second;
      ++ia;
    } else if (ia == a.end() || ib->first < ia->first) {
      uni += ib->second;
      ++ib;
    } else {
      inter += std::min(ia->second, ib->second);
      uni += std::max(ia->second, ib->second);
      ++ia;
      ++ib;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace text
}  // namespace kgqa
