#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace deep {

inline std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r' || s[i] == '\n')) ++i;
    size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r' && s[j] != '\n') ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename It>
std::string join(It begin, It end, std::string_view sep = " ") {
  std::string out;
  for (It it = begin; it != end; ++it) {
    if (it != begin) out += sep;
    out += *it;
  }
  return out;
}

inline std::string join(const std::vector<std::string>& v, std::string_view sep = " ") {
  return join(v.begin(), v.end(), sep);
}

// Number of bytes in the UTF-8 sequence starting at `lead`; 1 for malformed
// leads so scanning always advances.
inline size_t utf8_len(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xe) return 3;
  if ((lead >> 3) == 0x1e) return 4;
  return 1;
}

inline uint32_t utf8_decode(std::string_view s, size_t pos, size_t len) {
  uint32_t cp = 0;
  switch (len) {
    case 1: return static_cast<unsigned char>(s[pos]);
    case 2: cp = s[pos] & 0x1f; break;
    case 3: cp = s[pos] & 0x0f; break;
    case 4: cp = s[pos] & 0x07; break;
    default: return static_cast<unsigned char>(s[pos]);
  }
  for (size_t i = 1; i < len && pos + i < s.size(); ++i) {
    cp = (cp << 6) | (s[pos + i] & 0x3f);
  }
  return cp;
}

inline void utf8_encode(uint32_t cp, std::string& out) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xc0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3f));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xe0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
    out += static_cast<char>(0x80 | (cp & 0x3f));
  } else {
    out += static_cast<char>(0xf0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3f));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
    out += static_cast<char>(0x80 | (cp & 0x3f));
  }
}

// Simple case folding for Basic Latin and Cyrillic, which covers the
// languages this pipeline targets. Other scripts pass through unchanged.
inline uint32_t fold_codepoint(uint32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0x0410 && cp <= 0x042f) return cp + 0x20;   // А..Я -> а..я
  if (cp >= 0x0400 && cp <= 0x040f) return cp + 0x50;   // Ѐ..Џ -> ѐ..џ (Ё, І, Ї, Є, ...)
  if (cp >= 0x0460 && cp <= 0x0481 && cp % 2 == 0) return cp + 1;
  if (cp >= 0x048a && cp <= 0x04bf && cp % 2 == 0) return cp + 1;  // incl. Ґ -> ґ
  return cp;
}

inline std::string casefold(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    size_t len = utf8_len(static_cast<unsigned char>(s[i]));
    if (i + len > s.size()) len = 1;
    utf8_encode(fold_codepoint(utf8_decode(s, i, len)), out);
    i += len;
  }
  return out;
}

}  // namespace deep
