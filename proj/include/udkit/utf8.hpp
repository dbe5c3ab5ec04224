#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace udkit::utf8 {

// Decodes UTF-8 into codepoints. Invalid bytes decode as U+FFFD, one
// codepoint per offending byte, so decode never fails on real-world text.
std::vector<char32_t> decode(std::string_view s);

std::string encode(const std::vector<char32_t>& cps);
std::string encode_one(char32_t cp);

bool is_alpha(char32_t cp);
bool is_upper(char32_t cp);
bool is_digit(char32_t cp);
bool is_space(char32_t cp);

// Full per-codepoint lowercase mapping (one-to-many for a handful of
// codepoints, e.g. U+0130).
std::string to_lower(std::string_view s);

// Number of codepoints in a UTF-8 string.
size_t length(std::string_view s);

}  // namespace udkit::utf8
