#pragma once

// Small ASCII text helpers shared by the parser, the awareness metrics and the
// data loaders. Non-ASCII bytes pass through untouched.

#include <string>
#include <string_view>
#include <vector>

namespace persona {

constexpr char ascii_lower(char c) noexcept {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

constexpr bool ascii_alnum(char c) noexcept {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

constexpr bool ascii_space(char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string casefold(std::string_view s);
std::string_view trim(std::string_view s) noexcept;
std::string collapse_whitespace(std::string_view s);
std::vector<std::string> split_words(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Levenshtein distance over bytes.
std::size_t edit_distance(std::string_view a, std::string_view b);

}  // namespace persona
