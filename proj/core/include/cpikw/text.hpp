#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cpikw::text {

// Decodes UTF-8 into code points. Invalid bytes decode to U+FFFD.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);
std::string encode_utf8(char32_t c);

// Trims and collapses every whitespace run to a single ASCII space.
std::string normalize_whitespace(std::string_view s);

std::size_t count_code_points(std::string_view s);
std::size_t count_whitespace_tokens(std::string_view s);

std::string trim(std::string_view s);
bool is_space(char32_t c);

}  // namespace cpikw::text
