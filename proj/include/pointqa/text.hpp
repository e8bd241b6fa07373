#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pointqa::text {

// Lowercase, trim, collapse internal whitespace runs to one space.
std::string normalize(std::string_view s);

std::string trim(std::string_view s);
std::string lowercase(std::string_view s);

// Whitespace split, no other processing.
std::vector<std::string> split_whitespace(std::string_view s);

// Lowercased word tokens with punctuation stripped ("What's" -> "what's" is kept
// as one token; '?' ',' '.' '!' ';' ':' '"' are separators).
std::vector<std::string> word_tokens(std::string_view s);

std::string join(const std::vector<std::string>& words, std::string_view sep = " ");

std::string singularize(std::string_view noun);
std::string pluralize(std::string_view noun);

// "3", "three", "10" -> count; nullopt for anything else.
std::optional<int> parse_count(std::string_view answer);

bool ends_with(std::string_view s, std::string_view suffix);
bool starts_with(std::string_view s, std::string_view prefix);

// Uppercases the first character.
std::string capitalize(std::string_view s);

}  // namespace pointqa::text
