#include "pointqa/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <unordered_map>

namespace pointqa::text {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

const std::unordered_map<std::string, std::string>& irregular_plurals() {
    static const std::unordered_map<std::string, std::string> table = {
        {"person", "people"}, {"man", "men"},       {"woman", "women"},   {"child", "children"},
        {"sheep", "sheep"},   {"deer", "deer"},     {"fish", "fish"},     {"mouse", "mice"},
        {"goose", "geese"},   {"tooth", "teeth"},   {"foot", "feet"},     {"ox", "oxen"},
        {"knife", "knives"},  {"leaf", "leaves"},   {"shelf", "shelves"}, {"wolf", "wolves"},
        {"calf", "calves"},   {"scarf", "scarves"}, {"life", "lives"},    {"wife", "wives"},
        {"bus", "buses"},     {"glasses", "glasses"}, {"jeans", "jeans"}, {"pants", "pants"},
        {"shorts", "shorts"}, {"skis", "skis"},     {"scissors", "scissors"}, {"bison", "bison"},
        {"moose", "moose"},   {"aircraft", "aircraft"}, {"series", "series"}, {"species", "species"},
        {"cactus", "cacti"},  {"tomato", "tomatoes"}, {"potato", "potatoes"}, {"hero", "heroes"},
        {"cow", "cows"},      {"zebra", "zebras"},  {"giraffe", "giraffes"}, {"banana", "bananas"},
        {"pizza", "pizzas"},  {"umbrella", "umbrellas"}, {"lens", "lenses"}, {"grass", "grass"},
        {"hair", "hair"},     {"furniture", "furniture"}, {"luggage", "luggage"},
    };
    return table;
}

const std::unordered_map<std::string, std::string>& irregular_singulars() {
    static const std::unordered_map<std::string, std::string> table = [] {
        std::unordered_map<std::string, std::string> inv;
        for (const auto& [singular, plural] : irregular_plurals()) inv.emplace(plural, singular);
        return inv;
    }();
    return table;
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

}  // namespace

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string normalize(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

std::vector<std::string> split_whitespace(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (is_space(c)) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::vector<std::string> word_tokens(std::string_view s) {
    static constexpr std::string_view separators = "?,.!;:\"()";
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (is_space(c) || separators.find(c) != std::string_view::npos) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string join(const std::vector<std::string>& words, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out.append(sep);
        out.append(words[i]);
    }
    return out;
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool starts_with(std::string_view s, std::string_view prefix) {
    return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

std::string singularize(std::string_view noun_in) {
    const std::string noun = lowercase(noun_in);
    if (auto it = irregular_singulars().find(noun); it != irregular_singulars().end()) return it->second;
    if (irregular_plurals().contains(noun)) return noun;  // already singular
    const std::size_t n = noun.size();
    if (n > 4 && ends_with(noun, "ies")) return noun.substr(0, n - 3) + "y";
    for (std::string_view suf : {"ches", "shes", "sses", "xes", "zzes"}) {
        if (ends_with(noun, suf)) return noun.substr(0, n - 2);
    }
    if (n > 2 && noun.back() == 's' && !ends_with(noun, "ss") && !ends_with(noun, "us") &&
        !ends_with(noun, "is")) {
        return noun.substr(0, n - 1);
    }
    return noun;
}

std::string pluralize(std::string_view noun_in) {
    const std::string noun = lowercase(noun_in);
    if (auto it = irregular_plurals().find(noun); it != irregular_plurals().end()) return it->second;
    const std::size_t n = noun.size();
    if (n == 0) return noun;
    if (n > 1 && noun.back() == 'y' && !is_vowel(noun[n - 2])) return noun.substr(0, n - 1) + "ies";
    for (std::string_view suf : {"s", "x", "z", "ch", "sh"}) {
        if (ends_with(noun, suf)) return noun + "es";
    }
    return noun + "s";
}

std::optional<int> parse_count(std::string_view answer_in) {
    std::string answer = normalize(answer_in);
    while (!answer.empty() && (answer.back() == '.' || answer.back() == '!')) answer.pop_back();
    static const std::array<std::string_view, 21> words = {
        "zero",    "one",     "two",       "three",    "four",     "five",    "six",
        "seven",   "eight",   "nine",      "ten",      "eleven",   "twelve",  "thirteen",
        "fourteen", "fifteen", "sixteen",  "seventeen", "eighteen", "nineteen", "twenty"};
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (answer == words[i]) return static_cast<int>(i);
    }
    int value = 0;
    const auto* first = answer.data();
    const auto* last = answer.data() + answer.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || answer.empty()) return std::nullopt;
    return value;
}

std::string capitalize(std::string_view s) {
    std::string out(s);
    if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    return out;
}

}  // namespace pointqa::text
