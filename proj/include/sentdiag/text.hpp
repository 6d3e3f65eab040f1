#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// UTF-8 helpers shared by prompt building, flip validation and matching.
// Nothing here normalizes text; callers always keep the original bytes.
namespace sentdiag::text {

// Invalid sequences decode to U+FFFD, one per offending byte.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);
std::size_t codepoint_length(std::string_view s);

bool is_emoji(char32_t cp);

std::string trim(std::string_view s);
std::string ascii_lower(std::string_view s);
bool iequals_ascii(std::string_view a, std::string_view b);

// Whitespace-split tokens with surrounding ASCII punctuation stripped and ASCII
// case folded. Tokens with no letter or digit (pure emoji, "!!!") are dropped.
std::vector<std::string> word_tokens(std::string_view s);
std::size_t word_count(std::string_view s);

// Levenshtein distance over code points.
std::size_t edit_distance(std::string_view a, std::string_view b);

// Small closed list of frequent English words and chat shorthand.
bool is_common_english(std::string_view lowered_token);

// JSON string literal (with quotes), UTF-8 kept as-is.
std::string quote(std::string_view s);

}  // namespace sentdiag::text
