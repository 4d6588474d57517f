#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace cotkit::text {

// UTF-8 <-> Unicode scalar values. Offsets everywhere in the toolkit count
// scalar values, so anything touching step offsets goes through these.
std::u32string decode_utf8(std::string_view bytes);
std::string encode_utf8(std::u32string_view scalars);
std::size_t scalar_count(std::string_view bytes);

bool is_space(char32_t c) noexcept;
bool is_ascii_digit(char32_t c) noexcept;
bool is_word_char(char32_t c) noexcept;

std::string_view trim(std::string_view s) noexcept;
std::string to_lower_ascii(std::string_view s);

/// Whitespace-delimited words.
std::vector<std::string_view> split_words(std::string_view s);

/// True when `phrase` occurs in `haystack` with word boundaries on both
/// sides. Both arguments are compared ASCII-case-insensitively; inner
/// whitespace in the phrase matches any whitespace run.
bool contains_whole_word(std::string_view haystack, std::string_view phrase);

/// First `n` whitespace-delimited words joined by single spaces.
std::string leading_words(std::string_view s, std::size_t n);

}  // namespace cotkit::text
