#include <doctest.h>

#include "cotkit/error.hpp"
#include "cotkit/text.hpp"

using namespace cotkit;

TEST_CASE("utf8 round trip and scalar counting") {
  const std::string s = "añ€😀";
  const auto scalars = text::decode_utf8(s);
  CHECK(scalars.size() == 4);
  CHECK(text::encode_utf8(scalars) == s);
  CHECK(text::scalar_count(s) == 4);
}

TEST_CASE("invalid utf8 is rejected") {
  CHECK_THROWS_AS(text::decode_utf8("\xC3"), Error);
  CHECK_THROWS_AS(text::decode_utf8("\xFF"), Error);
  CHECK_THROWS_AS(text::decode_utf8("\xC0\xAF"), Error);  // overlong '/'
}

TEST_CASE("whole-word matching") {
  CHECK(text::contains_whole_word("Perhaps x is 3", "perhaps"));
  CHECK(text::contains_whole_word("so, PERHAPS.", "perhaps"));
  CHECK_FALSE(text::contains_whole_word("perhapsx", "perhaps"));
  CHECK_FALSE(text::contains_whole_word("another", "other"));
  CHECK(text::contains_whole_word("what   if we try", "what if"));
  CHECK_FALSE(text::contains_whole_word("whatif", "what if"));
  CHECK(text::contains_whole_word("let me double-check", "double-check"));
  CHECK(text::contains_whole_word("let me double-check", "check"));
  CHECK_FALSE(text::contains_whole_word("", "x"));
}

TEST_CASE("leading words") {
  CHECK(text::leading_words("  a b\n c  d ", 3) == "a b c");
  CHECK(text::leading_words("", 3).empty());
  CHECK(text::split_words(" x  y ").size() == 2);
}
