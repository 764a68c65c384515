#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gridvqa {

// Strips leading/trailing ASCII whitespace.
std::string trim(std::string_view s);

// ASCII lowercase of the trimmed string. This is the only normalisation applied
// before answer matching and scoring.
std::string fold(std::string_view s);

std::vector<std::string> split_whitespace(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Decodes UTF-8 into code points; invalid bytes map to U+FFFD one byte at a time.
std::u32string utf8_decode(std::string_view s);

}  // namespace gridvqa
