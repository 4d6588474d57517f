#include "cotkit/text.hpp"

#include "cotkit/error.hpp"

namespace cotkit::text {

std::u32string decode_utf8(std::string_view bytes) {
  std::u32string out;
  out.reserve(bytes.size());
  std::size_t i = 0;
  const std::size_t n = bytes.size();
  while (i < n) {
    const auto lead = static_cast<unsigned char>(bytes[i]);
    char32_t cp = 0;
    std::size_t len = 0;
    if (lead < 0x80) {
      cp = lead;
      len = 1;
    } else if ((lead & 0xE0) == 0xC0) {
      cp = lead & 0x1F;
      len = 2;
    } else if ((lead & 0xF0) == 0xE0) {
      cp = lead & 0x0F;
      len = 3;
    } else if ((lead & 0xF8) == 0xF0) {
      cp = lead & 0x07;
      len = 4;
    } else {
      fail(ErrorCode::kSchema, "invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    if (i + len > n) fail(ErrorCode::kSchema, "truncated UTF-8 sequence at offset " + std::to_string(i));
    for (std::size_t k = 1; k < len; ++k) {
      const auto cont = static_cast<unsigned char>(bytes[i + k]);
      if ((cont & 0xC0) != 0x80) {
        fail(ErrorCode::kSchema, "invalid UTF-8 continuation byte at offset " + std::to_string(i + k));
      }
      cp = (cp << 6) | (cont & 0x3F);
    }
    const bool overlong = (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000);
    if (overlong || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      fail(ErrorCode::kSchema, "invalid UTF-8 scalar at offset " + std::to_string(i));
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string encode_utf8(std::u32string_view scalars) {
  std::string out;
  out.reserve(scalars.size());
  for (char32_t cp : scalars) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

std::size_t scalar_count(std::string_view bytes) {
  std::size_t count = 0;
  for (char c : bytes) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++count;
  }
  return count;
}

bool is_space(char32_t c) noexcept {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\v' || c == U'\f';
}

bool is_ascii_digit(char32_t c) noexcept { return c >= U'0' && c <= U'9'; }

bool is_word_char(char32_t c) noexcept {
  if (c >= 0x80) return true;  // treat non-ASCII letters as word characters
  return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') || is_ascii_digit(c) || c == U'_';
}

std::string_view trim(std::string_view s) noexcept {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::vector<std::string_view> split_words(std::string_view s) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !is_space(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) words.push_back(s.substr(start, i - start));
  }
  return words;
}

std::string leading_words(std::string_view s, std::size_t n) {
  std::string out;
  std::size_t taken = 0;
  for (auto w : split_words(s)) {
    if (taken == n) break;
    if (taken > 0) out.push_back(' ');
    out.append(w);
    ++taken;
  }
  return out;
}

namespace {

bool byte_is_word(std::string_view s, std::size_t i) {
  return is_word_char(static_cast<unsigned char>(s[i]));
}

// Matches `phrase` (already normalized) at position `pos` of `hay`; inner
// spaces in the phrase consume one or more whitespace bytes. Returns the end
// offset on success, npos otherwise.
std::size_t match_at(std::string_view hay, std::size_t pos, std::string_view phrase) {
  std::size_t h = pos;
  std::size_t p = 0;
  while (p < phrase.size()) {
    if (phrase[p] == ' ') {
      if (h >= hay.size() || !is_space(static_cast<unsigned char>(hay[h]))) return std::string_view::npos;
      while (h < hay.size() && is_space(static_cast<unsigned char>(hay[h]))) ++h;
      ++p;
      continue;
    }
    if (h >= hay.size() || hay[h] != phrase[p]) return std::string_view::npos;
    ++h;
    ++p;
  }
  return h;
}

}  // namespace

bool contains_whole_word(std::string_view haystack, std::string_view phrase) {
  const std::string needle = to_lower_ascii(leading_words(phrase, static_cast<std::size_t>(-1)));
  if (needle.empty()) return false;
  const std::string hay = to_lower_ascii(haystack);
  const bool starts_word = byte_is_word(needle, 0);
  const bool ends_word = byte_is_word(needle, needle.size() - 1);
  for (std::size_t pos = 0; pos < hay.size(); ++pos) {
    if (hay[pos] != needle[0]) continue;
    if (starts_word && pos > 0 && byte_is_word(hay, pos - 1)) continue;
    const std::size_t end = match_at(hay, pos, needle);
    if (end == std::string_view::npos) continue;
    if (ends_word && end < hay.size() && byte_is_word(hay, end)) continue;
    return true;
  }
  return false;
}

}  // namespace cotkit::text
